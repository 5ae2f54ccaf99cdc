#include "synctl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "synctl/checkpoint.hpp"
#include "synctl/svd.hpp"

namespace synctl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      raise("ConfigInvalid", "unknown key '" + key + "' in " + where);
  }
}

Td3Config td3_from_json(const json& j) {
  check_known_keys(j,
                   {"gamma", "tau", "policy_delay", "sigma_target", "noise_clip",
                    "sigma_explore", "batch_size", "lr", "grad_clip", "buffer_capacity",
                    "random_steps", "update_every"},
                   "td3");
  Td3Config c;
  c.gamma = j.value("gamma", c.gamma);
  c.tau = j.value("tau", c.tau);
  c.policy_delay = j.value("policy_delay", c.policy_delay);
  c.sigma_target = j.value("sigma_target", c.sigma_target);
  c.noise_clip = j.value("noise_clip", c.noise_clip);
  c.sigma_explore = j.value("sigma_explore", c.sigma_explore);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.random_steps = j.value("random_steps", c.random_steps);
  c.update_every = j.value("update_every", c.update_every);
  require(c.gamma >= 0.0 && c.gamma < 1.0, "ConfigInvalid", "td3.gamma out of range");
  require(c.batch_size >= 1, "ConfigInvalid", "td3.batch_size must be positive");
  require(c.update_every >= 1, "ConfigInvalid", "td3.update_every must be positive");
  return c;
}

json td3_to_json(const Td3Config& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"policy_delay", c.policy_delay},
          {"sigma_target", c.sigma_target},
          {"noise_clip", c.noise_clip},
          {"sigma_explore", c.sigma_explore},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"grad_clip", c.grad_clip},
          {"buffer_capacity", c.buffer_capacity},
          {"random_steps", c.random_steps},
          {"update_every", c.update_every}};
}

double t_critical_95(int n) {
  // two-sided 95% t-table by sample size n (df = n-1)
  static const double table[] = {0,     0,     12.706, 4.303, 3.182, 2.776, 2.571,
                                 2.447, 2.365, 2.306,  2.262, 2.228, 2.201, 2.179,
                                 2.160, 2.145, 2.131,  2.120, 2.110, 2.101, 2.093};
  if (n < 2) return 0.0;
  if (n <= 20) return table[n];
  return 1.96;
}

std::pair<double, double> mean_ci95(const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  if (n == 0) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (n < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1);
  return {mean, t_critical_95(n) * std::sqrt(var / n)};
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["family"] = family_path;
  j["mode"] = mode_name(mode);
  j["total_steps"] = total_steps;
  j["seeds"] = seeds;
  j["out_dir"] = out_dir;
  j["train_variants"] = train_variants;
  j["checkpoint_every"] = checkpoint_every;
  j["synergy_period"] = synergy_period;
  j["dq_batch"] = dq_batch;
  j["td3"] = td3_to_json(td3);
  j["net"] = net.to_json();
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  check_known_keys(j,
                   {"family", "mode", "total_steps", "seeds", "out_dir", "train_variants",
                    "checkpoint_every", "synergy_period", "dq_batch", "td3", "net"},
                   "run config");
  RunConfig c;
  require(j.contains("family"), "ConfigInvalid", "missing field 'family'");
  c.family_path = j.at("family").get<std::string>();
  c.mode = parse_mode(j.value("mode", "solar"));
  c.total_steps = j.value("total_steps", c.total_steps);
  require(c.total_steps > 0, "ConfigInvalid", "total_steps must be positive");
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  require(!c.seeds.empty(), "ConfigInvalid", "seeds must be non-empty");
  c.out_dir = j.value("out_dir", c.out_dir);
  c.train_variants = j.value("train_variants", c.train_variants);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.synergy_period = j.value("synergy_period", c.synergy_period);
  require(c.synergy_period > 0, "ConfigInvalid", "synergy_period must be positive");
  c.dq_batch = j.value("dq_batch", c.dq_batch);
  if (j.contains("td3")) c.td3 = td3_from_json(j.at("td3"));
  if (j.contains("net")) c.net = NetConfig::from_json(j.at("net"));
  require(fs::exists(c.family_path), "ConfigInvalid",
          "family file does not exist: " + c.family_path);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "ConfigInvalid", "cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "ConfigInvalid", "malformed JSON in " + path);
  return from_json(j);
}

std::string RunConfig::resolved_out_dir() const {
  const char* root = std::getenv("SYNERGY_CTL_OUT");
  if (root && *root && fs::path(out_dir).is_relative())
    return (fs::path(root) / out_dir).string();
  return out_dir;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& schema,
                     const std::string& header)
    : out_(path) {
  require(out_.good(), "ConfigInvalid", "cannot open " + path + " for writing");
  out_ << "# schema: " << schema << "\n" << header << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  out_.flush();  // rows are rare (one per episode/refresh); keep files current
}

std::string CsvWriter::fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string CsvWriter::fmt(std::int64_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// checkpoint packing
// ---------------------------------------------------------------------------

void save_policy(const std::string& path, const NetBundle& nets,
                 const std::map<std::string, SynergyStructure>& structures,
                 const json& extra_meta) {
  ParameterSet combined;
  for (const auto& [name, t] : nets.actor_params()) combined.add("actor/" + name, t);
  for (const auto& [name, t] : nets.critic_params()) combined.add("critic/" + name, t);

  json meta = extra_meta;
  meta["mode"] = mode_name(nets.mode());
  meta["net"] = nets.net_config().to_json();
  meta["base_obs_dim"] = nets.base_obs_dim();
  meta["max_actuators"] = nets.max_actuators();
  json st = json::object();
  for (const auto& [robot, s] : structures) {
    st[robot] = {{"assignment", s.assignment},
                 {"centers", s.centers},
                 {"version", s.version},
                 {"num_synergies", s.num_synergies}};
  }
  meta["structures"] = std::move(st);
  save_checkpoint(path, combined, meta);
}

LoadedPolicy load_policy(const std::string& checkpoint_path) {
  LoadedPolicy out;
  ParameterSet combined = load_checkpoint(checkpoint_path, &out.meta);
  require(out.meta.contains("mode") && out.meta.contains("net"),
          "IncompatibleCheckpoint", "missing mode/net metadata");

  const Mode mode = parse_mode(out.meta.at("mode").get<std::string>());
  const NetConfig net = NetConfig::from_json(out.meta.at("net"));
  const int base_obs_dim = out.meta.at("base_obs_dim").get<int>();
  const int max_actuators = out.meta.at("max_actuators").get<int>();

  ParameterSet actor, critic;
  for (const auto& [name, t] : combined) {
    if (name.rfind("actor/", 0) == 0)
      actor.add(name.substr(6), t);
    else if (name.rfind("critic/", 0) == 0)
      critic.add(name.substr(7), t);
  }
  out.nets = std::make_unique<NetBundle>(mode, net, base_obs_dim, max_actuators,
                                         Td3Config{}, 0);
  out.nets->load_actor(std::move(actor));
  out.nets->load_critic(std::move(critic));

  const json structures = out.meta.value("structures", json::object());
  for (const auto& [robot, s] : structures.items()) {
    SynergyStructure st;
    st.robot_id = robot;
    st.assignment = s.at("assignment").get<std::vector<int>>();
    st.centers = s.at("centers").get<std::vector<int>>();
    st.version = s.at("version").get<std::int64_t>();
    st.num_synergies = s.at("num_synergies").get<int>();
    st.mask = synergy_mask(st.assignment);
    out.structures.emplace(robot, std::move(st));
  }
  return out;
}

SynergyStructure eval_structure(const LoadedPolicy& policy, const VariantFamily& family,
                                const std::string& variant_id) {
  auto it = policy.structures.find(variant_id);
  if (it != policy.structures.end()) return it->second;
  // unseen morphology: cluster on morphology alone (no value history exists)
  return morphology_only_structure(family.variant(variant_id).morphology);
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

SeedRunResult run_training_seed(const RunConfig& config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const VariantFamily family = load_family(config.family_path);
  const std::vector<std::string> train_ids =
      config.train_variants.empty() ? family.train_ids : config.train_variants;

  const fs::path dir = fs::path(config.resolved_out_dir()) / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);

  {
    json echo = config.to_json();
    echo["seed"] = seed;
    std::ofstream out(dir / "config.json");
    out << echo.dump(2) << "\n";
  }

  TrainerConfig tc;
  tc.mode = config.mode;
  tc.net = config.net;
  tc.td3 = config.td3;
  tc.synergy.period = config.synergy_period;
  tc.synergy.dq_batch = config.dq_batch;
  tc.total_steps = config.total_steps;
  tc.seed = seed;
  Trainer trainer(family, train_ids, tc);

  CsvWriter metrics((dir / "metrics.csv").string(), "metrics/1",
                    "step,robot_id,episode_return,episode_len,critic_loss,actor_loss,"
                    "num_synergies,synergy_version");
  std::unique_ptr<CsvWriter> synergy_csv;
  if (config.mode != Mode::kMonolithic)
    synergy_csv = std::make_unique<CsvWriter>(
        (dir / "synergy.csv").string(), "synergy/1",
        "step,robot_id,version,actuator,synergy_index,is_center");

  auto structures_now = [&]() {
    std::map<std::string, SynergyStructure> out;
    if (config.mode == Mode::kMonolithic) return out;
    for (const auto& id : trainer.train_ids()) out.emplace(id, trainer.structure(id));
    return out;
  };

  std::int64_t next_ckpt =
      config.checkpoint_every > 0 ? config.checkpoint_every : config.total_steps + 1;
  trainer.run(
      [&](const EpisodeRow& r) {
        const bool synergyless = config.mode == Mode::kMonolithic;
        metrics.row({CsvWriter::fmt(r.step), r.robot_id,
                     CsvWriter::fmt(r.episode_return),
                     CsvWriter::fmt(static_cast<std::int64_t>(r.episode_len)),
                     CsvWriter::fmt(r.critic_loss), CsvWriter::fmt(r.actor_loss),
                     synergyless ? "" : CsvWriter::fmt(static_cast<std::int64_t>(r.num_synergies)),
                     synergyless ? "" : CsvWriter::fmt(r.synergy_version)});
      },
      [&](const SynergyRow& r) {
        if (synergy_csv)
          synergy_csv->row({CsvWriter::fmt(r.step), r.robot_id, CsvWriter::fmt(r.version),
                            CsvWriter::fmt(static_cast<std::int64_t>(r.actuator)),
                            CsvWriter::fmt(static_cast<std::int64_t>(r.synergy_index)),
                            r.is_center ? "1" : "0"});
      },
      [&](std::int64_t step) {
        while (step >= next_ckpt) {
          save_policy((dir / ("ckpt_" + std::to_string(next_ckpt) + ".bin")).string(),
                      trainer.nets(), structures_now(), {{"step", next_ckpt}});
          next_ckpt += config.checkpoint_every;
        }
      });

  SeedRunResult res;
  res.seed = seed;
  res.dir = dir.string();
  res.checkpoint = (dir / "ckpt_final.bin").string();
  save_policy(res.checkpoint, trainer.nets(), structures_now(),
              {{"step", trainer.global_step()}});
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    json info{{"seed", seed},
              {"steps", trainer.global_step()},
              {"wall_seconds", res.wall_seconds},
              {"mode", mode_name(config.mode)}};
    std::ofstream out(dir / "run_info.json");
    out << info.dump(2) << "\n";
  }
  return res;
}

int cmd_train(const RunConfig& config, std::optional<std::uint64_t> seed_override) {
  fs::create_directories(config.resolved_out_dir());
  {
    std::ofstream out(fs::path(config.resolved_out_dir()) / "config.json");
    out << config.to_json().dump(2) << "\n";
  }
  std::vector<std::uint64_t> seeds =
      seed_override ? std::vector<std::uint64_t>{*seed_override} : config.seeds;
  for (auto seed : seeds) {
    const SeedRunResult res = run_training_seed(config, seed);
    std::cout << "seed " << seed << ": " << res.checkpoint << " ("
              << CsvWriter::fmt(res.wall_seconds) << "s)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

std::vector<VariantEval> evaluate_checkpoint(const std::string& checkpoint_path,
                                             const VariantFamily& family,
                                             const std::vector<std::string>& variant_ids,
                                             int episodes, std::uint64_t eval_seed) {
  LoadedPolicy policy = load_policy(checkpoint_path);
  require(policy.nets->base_obs_dim() == family.state_dim, "IncompatibleCheckpoint",
          "state_dim mismatch");
  require(policy.nets->max_actuators() >= family.max_actuators(),
          "IncompatibleCheckpoint",
          "checkpoint embedding pool smaller than family max actuators");

  std::vector<VariantEval> out;
  for (const auto& id : variant_ids) {
    const Variant& variant = family.variant(id);
    const RobotSpec spec = robot_spec(variant.morphology);
    const SynergyStructure structure = eval_structure(policy, family, id);
    LinkWorld env = make_env(family, id);

    std::vector<double> returns;
    Rng noise(0);  // unused in deterministic rollouts
    for (int ep = 0; ep < episodes; ++ep) {
      const auto stats = rollout(env, *policy.nets, structure, spec,
                                 ExplorePolicy::kDeterministic, 0.0,
                                 env.params().horizon, nullptr, noise,
                                 derive_seed(eval_seed, "eval/" + id + "/" +
                                                            std::to_string(ep)));
      returns.push_back(stats.episode_return);
    }
    VariantEval ve;
    ve.variant = id;
    ve.heldout = std::find(family.test_ids.begin(), family.test_ids.end(), id) !=
                 family.test_ids.end();
    ve.n = episodes;
    std::tie(ve.mean_return, ve.ci95) = mean_ci95(returns);
    out.push_back(std::move(ve));
  }
  return out;
}

double random_policy_return(const VariantFamily& family, const std::string& variant_id,
                            int episodes, std::uint64_t eval_seed) {
  LinkWorld env = make_env(family, variant_id);
  const int k = env.num_actuators();
  std::vector<double> returns;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(eval_seed, "rand/" + variant_id + "/" + std::to_string(ep)));
    Rng rng(derive_seed(eval_seed, "randact/" + variant_id + "/" + std::to_string(ep)));
    double ret = 0.0;
    for (int t = 0; t < env.params().horizon; ++t) {
      Tensor a(k, 1);
      for (int i = 0; i < k; ++i) a.at(i, 0) = rng.uniform(-1.0, 1.0);
      const auto res = env.step(a);
      ret += res.reward;
      if (res.done) break;
    }
    returns.push_back(ret);
  }
  return mean_ci95(returns).first;
}

namespace {

std::vector<std::string> split_ids(const VariantFamily& family, const std::string& split) {
  if (split == "train") return family.train_ids;
  if (split == "test") return family.test_ids;
  if (split == "all") {
    std::vector<std::string> ids = family.train_ids;
    ids.insert(ids.end(), family.test_ids.begin(), family.test_ids.end());
    return ids;
  }
  raise("ConfigInvalid", "unknown split '" + split + "' (train|test|all)");
}

std::vector<std::string> sorted_seed_checkpoints(const std::string& run_dir) {
  std::vector<std::string> out;
  require(fs::is_directory(run_dir), "ConfigInvalid", "not a directory: " + run_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(run_dir))
    if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0)
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs)
    if (fs::exists(d / "ckpt_final.bin")) out.push_back((d / "ckpt_final.bin").string());
  require(!out.empty(), "ConfigInvalid", "no seed_*/ckpt_final.bin under " + run_dir);
  return out;
}

}  // namespace

int cmd_eval(const std::string& checkpoint, const std::string& run_dir,
             const std::string& family_path, const std::string& split, int episodes,
             std::uint64_t eval_seed, const std::string& out_csv) {
  require(checkpoint.empty() != run_dir.empty(), "ConfigInvalid",
          "exactly one of --checkpoint and --run is required");
  const VariantFamily family = load_family(family_path);
  const auto ids = split_ids(family, split);

  // variant -> per-source mean returns (sources: episodes or seeds)
  std::vector<VariantEval> rows;
  if (!checkpoint.empty()) {
    if (episodes > 0) rows = evaluate_checkpoint(checkpoint, family, ids, episodes, eval_seed);
  } else {
    const auto ckpts = sorted_seed_checkpoints(run_dir);
    std::map<std::string, std::vector<double>> by_variant;
    if (episodes > 0)
      for (const auto& ck : ckpts) {
        const auto evals = evaluate_checkpoint(ck, family, ids, episodes, eval_seed);
        for (const auto& e : evals) by_variant[e.variant].push_back(e.mean_return);
      }
    for (const auto& id : ids) {
      if (!by_variant.count(id)) continue;
      VariantEval ve;
      ve.variant = id;
      ve.heldout = std::find(family.test_ids.begin(), family.test_ids.end(), id) !=
                   family.test_ids.end();
      ve.n = static_cast<int>(by_variant[id].size());
      std::tie(ve.mean_return, ve.ci95) = mean_ci95(by_variant[id]);
      rows.push_back(std::move(ve));
    }
  }

  std::printf("%-24s %8s %6s %14s %12s\n", "variant", "heldout", "n", "mean_return",
              "ci95");
  for (const auto& r : rows)
    std::printf("%-24s %8s %6d %14.3f %12.3f\n", r.variant.c_str(),
                r.heldout ? "yes" : "no", r.n, r.mean_return, r.ci95);

  if (!out_csv.empty()) {
    CsvWriter csv(out_csv, "eval/1", "variant,heldout,n,mean_return,ci95");
    for (const auto& r : rows)
      csv.row({r.variant, r.heldout ? "1" : "0",
               CsvWriter::fmt(static_cast<std::int64_t>(r.n)),
               CsvWriter::fmt(r.mean_return), CsvWriter::fmt(r.ci95)});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// cluster / export / rank-check
// ---------------------------------------------------------------------------

int cmd_cluster(const std::string& similarity_path, const std::string& morphology_path,
                const std::string& preference_csv, const ApOptions& options,
                const std::string& out_path) {
  require(similarity_path.empty() != morphology_path.empty(), "ConfigInvalid",
          "exactly one of --similarity and --morphology is required");

  SimilarityMatrix s;
  if (!similarity_path.empty()) {
    std::ifstream in(similarity_path);
    require(in.good(), "ConfigInvalid", "cannot open " + similarity_path);
    json j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), "ConfigInvalid", "malformed similarity JSON");
    const json& rows = j.is_array() ? j : j.at("S");
    const int n = static_cast<int>(rows.size());
    s = SimilarityMatrix::zeros(n);
    for (int i = 0; i < n; ++i) {
      require(static_cast<int>(rows[i].size()) == n, "DimensionMismatch",
              "similarity matrix must be square");
      for (int jj = 0; jj < n; ++jj) s.at(i, jj) = rows[i][jj].get<double>();
    }
  } else {
    const MorphologyGraph g = load_morphology(morphology_path);
    const DistanceMatrix d = shortest_distances(build_adjacency(g));
    std::optional<std::vector<double>> pref;
    if (!preference_csv.empty()) {
      std::ifstream in(preference_csv);
      require(in.good(), "ConfigInvalid", "cannot open " + preference_csv);
      std::vector<double> values;
      std::string token;
      while (std::getline(in, token)) {
        std::stringstream line(token);
        std::string cell;
        while (std::getline(line, cell, ','))
          if (!cell.empty()) values.push_back(std::stod(cell));
      }
      pref = std::move(values);
    }
    s = build_similarity(d, pref);
  }

  const ClusterResult r = affinity_propagation(s, options);
  json out{{"exemplars", r.centers},
           {"exemplar_of", r.exemplar_of},
           {"clusters", r.clusters},
           {"converged", r.converged},
           {"iterations", r.iterations_run}};
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    require(f.good(), "ConfigInvalid", "cannot open " + out_path);
    f << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_export_synergies(const std::string& run_dir) {
  require(fs::is_directory(run_dir), "ConfigInvalid", "not a directory: " + run_dir);
  int exported = 0;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "synergy.csv") continue;
    std::ifstream in(entry.path());
    std::string line;
    std::map<std::string, std::vector<std::string>> per_robot;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
      const auto first_comma = line.find(',');
      const auto second_comma = line.find(',', first_comma + 1);
      require(first_comma != std::string::npos && second_comma != std::string::npos,
              "ConfigInvalid", "malformed synergy.csv row: " + line);
      const std::string robot = line.substr(first_comma + 1, second_comma - first_comma - 1);
      // drop the robot column: step,version,actuator,synergy_index,is_center
      per_robot[robot].push_back(line.substr(0, first_comma) + line.substr(second_comma));
    }
    for (const auto& [robot, rows] : per_robot) {
      CsvWriter csv((entry.path().parent_path() / ("synergies_" + robot + ".csv")).string(),
                    "synergy-robot/1", "step,version,actuator,synergy_index,is_center");
      for (const auto& r : rows) {
        std::vector<std::string> cells;
        std::stringstream ss(r);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        csv.row(cells);
      }
      ++exported;
    }
  }
  require(exported > 0, "ConfigInvalid", "no synergy.csv found under " + run_dir);
  std::cout << "exported " << exported << " per-robot synergy files\n";
  return 0;
}

RankCheckResult rank_check(const std::string& checkpoint_path,
                           const VariantFamily& family, const std::string& variant_id,
                           int samples, const std::string& synergies_spec,
                           std::uint64_t eval_seed) {
  LoadedPolicy policy = load_policy(checkpoint_path);
  require(policy.nets->mode() == Mode::kSolar || policy.nets->mode() == Mode::kNoPreference,
          "ConfigInvalid", "rank-check requires a synergy-aware checkpoint");
  const Variant& variant = family.variant(variant_id);
  const RobotSpec spec = robot_spec(variant.morphology);
  const int k = spec.num_actuators;

  SynergyStructure structure;
  if (synergies_spec == "current") {
    structure = eval_structure(policy, family, variant_id);
  } else {
    std::vector<int> assignment(static_cast<std::size_t>(k), 0);
    if (synergies_spec == "1") {
      // all zero
    } else if (synergies_spec == "2") {
      require(k >= 2, "ConfigInvalid", "K < 2 cannot form two synergies");
      for (int i = k / 2; i < k; ++i) assignment[static_cast<std::size_t>(i)] = 1;
    } else if (synergies_spec == "K") {
      for (int i = 0; i < k; ++i) assignment[static_cast<std::size_t>(i)] = i;
    } else {
      raise("ConfigInvalid", "--synergies must be one of 1|2|K|current");
    }
    structure.robot_id = variant_id;
    structure.assignment = assignment;
    structure.num_synergies =
        1 + *std::max_element(assignment.begin(), assignment.end());
    for (int g = 0; g < structure.num_synergies; ++g)
      for (int i = 0; i < k; ++i)
        if (assignment[static_cast<std::size_t>(i)] == g) {
          structure.centers.push_back(i);
          break;
        }
    structure.mask = synergy_mask(assignment);
  }

  LinkWorld env = make_env(family, variant_id);
  Tensor stacked(samples, k);
  Rng noise(0);
  int row = 0;
  std::uint64_t episode = 0;
  while (row < samples) {
    env.reset(derive_seed(eval_seed, "rank/" + variant_id + "/" + std::to_string(episode)));
    ++episode;
    for (int t = 0; t < env.params().horizon && row < samples; ++t) {
      const Tensor obs = env.observe();
      const Tensor a = policy.nets->act(obs, structure, spec);
      for (int i = 0; i < k; ++i) stacked.at(row, i) = a.at(i, 0);
      ++row;
      if (env.step(a).done) break;
    }
  }

  RankCheckResult res;
  res.num_synergies = structure.num_synergies;
  res.measured_rank = numerical_rank(stacked, 1e-8);
  const auto eval = policy.nets->act_full(env.observe(), structure, spec);
  require(eval.t_matrix.has_value(), "ConfigInvalid", "mode exposes no T matrix");
  res.t_rank = numerical_rank(*eval.t_matrix, 1e-8);
  res.pass = res.measured_rank <= structure.num_synergies;
  return res;
}

int cmd_rank_check(const std::string& checkpoint, const std::string& family_path,
                   const std::string& variant_id, int samples,
                   const std::string& synergies_spec) {
  const VariantFamily family = load_family(family_path);
  const RankCheckResult res =
      rank_check(checkpoint, family, variant_id, samples, synergies_spec, 0);
  std::printf("variant=%s samples=%d rank=%d L=%d t_rank=%d %s\n", variant_id.c_str(),
              samples, res.measured_rank, res.num_synergies, res.t_rank,
              res.pass ? "PASS" : "FAIL");
  return res.pass ? 0 : 1;
}

}  // namespace synctl
