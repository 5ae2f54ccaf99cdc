#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "synctl/harness.hpp"

using namespace synctl;

int main(int argc, char** argv) {
  CLI::App app{"synergy-aware modular RL on toy planar robots"};
  app.require_subcommand(1);

  // train
  std::string config_path, out_override;
  std::int64_t seed_flag = -1;
  auto* train = app.add_subcommand("train", "run multi-task training");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed_flag, "train a single seed instead of config.seeds");
  train->add_option("--out", out_override, "override out_dir");

  // eval
  std::string eval_ckpt, eval_run, eval_family, eval_split = "train", eval_csv;
  int eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "deterministic policy evaluation");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  eval->add_option("--run", eval_run, "run directory with seed_*/ckpt_final.bin");
  eval->add_option("--family", eval_family, "variant family JSON")->required();
  eval->add_option("--split", eval_split, "train|test|all");
  eval->add_option("--episodes", eval_episodes, "episodes per variant");
  eval->add_option("--eval-seed", eval_seed, "evaluation seed");
  eval->add_option("--out", eval_csv, "write eval CSV here");

  // cluster
  std::string cl_similarity, cl_morphology, cl_preference, cl_out;
  ApOptions cl_options;
  auto* cluster = app.add_subcommand("cluster", "affinity propagation");
  cluster->add_option("--similarity", cl_similarity, "similarity matrix JSON");
  cluster->add_option("--morphology", cl_morphology, "morphology JSON");
  cluster->add_option("--preference", cl_preference, "preference CSV");
  cluster->add_option("--max-iter", cl_options.max_iter, "message passing rounds");
  cluster->add_option("--damping", cl_options.damping, "damping factor in [0,1)");
  cluster->add_option("--stable-window", cl_options.stable_window,
                      "stable iterations to declare convergence");
  cluster->add_option("--out", cl_out, "write result JSON here (default stdout)");

  // export-synergies
  std::string exp_run;
  auto* exp = app.add_subcommand("export-synergies", "per-robot synergy CSVs");
  exp->add_option("--run", exp_run, "run directory")->required();

  // rank-check
  std::string rk_ckpt, rk_family, rk_variant, rk_synergies = "current";
  int rk_samples = 1000;
  auto* rank = app.add_subcommand("rank-check", "action-space rank vs synergy count");
  rank->add_option("--checkpoint", rk_ckpt, "checkpoint file")->required();
  rank->add_option("--family", rk_family, "variant family JSON")->required();
  rank->add_option("--variant", rk_variant, "variant id")->required();
  rank->add_option("--samples", rk_samples, "action vectors to stack");
  rank->add_option("--synergies", rk_synergies, "structure: 1|2|K|current");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunConfig config = RunConfig::from_file(config_path);
      if (!out_override.empty()) config.out_dir = out_override;
      std::optional<std::uint64_t> seed;
      if (seed_flag >= 0) seed = static_cast<std::uint64_t>(seed_flag);
      return cmd_train(config, seed);
    }
    if (eval->parsed())
      return cmd_eval(eval_ckpt, eval_run, eval_family, eval_split, eval_episodes,
                      eval_seed, eval_csv);
    if (cluster->parsed())
      return cmd_cluster(cl_similarity, cl_morphology, cl_preference, cl_options, cl_out);
    if (exp->parsed()) return cmd_export_synergies(exp_run);
    if (rank->parsed())
      return cmd_rank_check(rk_ckpt, rk_family, rk_variant, rk_samples, rk_synergies);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
