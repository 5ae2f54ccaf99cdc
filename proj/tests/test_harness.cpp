#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "synctl/harness.hpp"
#include "synctl/svd.hpp"

using namespace synctl;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_config() {
  return {{"family", std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json"}};
}

NetConfig tiny_net() {
  NetConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_hidden = 16;
  cfg.embed_size = 6;
  cfg.relation_hidden = 8;
  cfg.relation_out = 6;
  cfg.critic_head_hidden = 16;
  cfg.mlp_hidden = 16;
  return cfg;
}

}  // namespace

TEST_CASE("run config: defaults, validation, unknown keys") {
  SUBCASE("defaults echo the spec values") {
    RunConfig c = RunConfig::from_json(minimal_config());
    CHECK(c.mode == Mode::kSolar);
    CHECK(c.total_steps == 200000);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(c.synergy_period == 50000);
    CHECK(c.td3.batch_size == 100);
    CHECK(c.td3.lr == 1e-4);
    CHECK(c.td3.grad_clip == 0.1);
    CHECK(c.net.d_model == 128);
    CHECK(c.net.ffn_hidden == 256);
    CHECK(c.net.intra_layers == 1);
    CHECK(c.net.inter_layers == 2);
    CHECK(c.net.heads == 2);
  }
  SUBCASE("unknown keys are named in the error") {
    auto j = minimal_config();
    j["totl_steps"] = 5;
    CHECK_THROWS_WITH_AS(RunConfig::from_json(j), doctest::Contains("totl_steps"), Error);
  }
  SUBCASE("missing family file") {
    nlohmann::json j{{"family", "/nonexistent/family.json"}};
    CHECK_THROWS_WITH_AS(RunConfig::from_json(j), doctest::Contains("ConfigInvalid"),
                         Error);
  }
  SUBCASE("bad mode and bad steps") {
    auto j = minimal_config();
    j["mode"] = "solarish";
    CHECK_THROWS_WITH_AS(RunConfig::from_json(j), doctest::Contains("ConfigInvalid"),
                         Error);
    auto j2 = minimal_config();
    j2["total_steps"] = 0;
    CHECK_THROWS_WITH_AS(RunConfig::from_json(j2), doctest::Contains("total_steps"),
                         Error);
  }
  SUBCASE("roundtrip through to_json") {
    RunConfig c = RunConfig::from_json(minimal_config());
    RunConfig c2 = RunConfig::from_json(c.to_json());
    CHECK(c2.total_steps == c.total_steps);
    CHECK(c2.td3.lr == c.td3.lr);
  }
}

TEST_CASE("SYNERGY_CTL_OUT overrides relative output roots") {
  RunConfig c = RunConfig::from_json(minimal_config());
  c.out_dir = "runs/x";
  setenv("SYNERGY_CTL_OUT", "/tmp/synctl_root", 1);
  CHECK(c.resolved_out_dir() == "/tmp/synctl_root/runs/x");
  c.out_dir = "/abs/path";
  CHECK(c.resolved_out_dir() == "/abs/path");
  unsetenv("SYNERGY_CTL_OUT");
  c.out_dir = "runs/x";
  CHECK(c.resolved_out_dir() == "runs/x");
}

TEST_CASE("csv writer: schema line first, stable formatting") {
  const std::string path = "/tmp/synctl_csv_test.csv";
  {
    CsvWriter csv(path, "metrics/1", "a,b");
    csv.row({CsvWriter::fmt(1.5), CsvWriter::fmt(std::int64_t{7})});
  }
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "# schema: metrics/1");
  CHECK(l2 == "a,b");
  CHECK(l3 == "1.5,7");
}

TEST_CASE("policy checkpoints round-trip through save/load") {
  const VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json");
  Td3Config td3;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, fam.max_actuators(),
                 td3, 31);
  std::map<std::string, SynergyStructure> structures;
  structures.emplace("hopper_3", SynergyStructure::warmup("hopper_3", 3, 100));

  const std::string path = "/tmp/synctl_policy_ckpt.bin";
  save_policy(path, nets, structures, {{"step", 42}});
  LoadedPolicy loaded = load_policy(path);

  CHECK(loaded.nets->mode() == Mode::kSolar);
  CHECK(loaded.nets->max_actuators() == fam.max_actuators());
  CHECK(loaded.structures.count("hopper_3") == 1);
  CHECK(loaded.structures.at("hopper_3").num_synergies == 1);
  CHECK(loaded.meta.at("step") == 42);

  // identical deterministic actions after reload
  const RobotSpec spec = robot_spec(fam.variant("hopper_3").morphology);
  const SynergyStructure st = SynergyStructure::warmup("hopper_3", 3, 100);
  Rng rng(32);
  Tensor obs = oracles::random_tensor(3, LinkWorld::kBaseStateDim, rng);
  Tensor a1 = nets.act(obs, st, spec);
  Tensor a2 = loaded.nets->act(obs, st, spec);
  for (int i = 0; i < 3; ++i) CHECK(a1.at(i, 0) == a2.at(i, 0));
}

TEST_CASE("eval: episode counts, split contract, held-out structures") {
  const VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/biped9.json");
  Td3Config td3;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, fam.max_actuators(),
                 td3, 33);
  const std::string path = "/tmp/synctl_eval_ckpt.bin";
  save_policy(path, nets, {}, {});

  SUBCASE("random-init checkpoint reports finite returns") {
    auto evals = evaluate_checkpoint(path, fam, {"biped_9_full"}, 2, 9);
    REQUIRE(evals.size() == 1);
    CHECK(std::isfinite(evals[0].mean_return));
    CHECK(evals[0].n == 2);
  }
  SUBCASE("held-out variants are marked and evaluable without stored structures") {
    auto evals = evaluate_checkpoint(path, fam, fam.test_ids, 1, 9);
    REQUIRE(evals.size() == 2);
    for (const auto& e : evals) CHECK(e.heldout);
  }
  SUBCASE("incompatible checkpoint is rejected") {
    NetBundle small(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, 4, td3, 34);
    const std::string small_path = "/tmp/synctl_small_ckpt.bin";
    save_policy(small_path, small, {}, {});
    CHECK_THROWS_WITH_AS(evaluate_checkpoint(small_path, fam, {"biped_9_full"}, 1, 9),
                         doctest::Contains("IncompatibleCheckpoint"), Error);
  }
}

TEST_CASE("random-policy baseline is reproducible") {
  const VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json");
  const double a = random_policy_return(fam, "hopper_3", 3, 5);
  const double b = random_policy_return(fam, "hopper_3", 3, 5);
  CHECK(a == b);
  CHECK(std::isfinite(a));
}

TEST_CASE("singular values and numerical rank") {
  // rank-2 matrix with known singular values 5 and 3
  Tensor m(4, 3);
  m.at(0, 0) = 5.0;
  m.at(1, 1) = 3.0;
  auto sv = singular_values(m);
  CHECK(sv[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(sv[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(sv[2] == doctest::Approx(0.0).scale(1.0));
  CHECK(numerical_rank(m) == 2);

  Rng rng(35);
  // random rank-2 product: 20x2 times 2x5
  Tensor a = oracles::random_tensor(20, 2, rng);
  Tensor b = oracles::random_tensor(2, 5, rng);
  CHECK(numerical_rank(gemm_nn(a, b)) == 2);
}

TEST_CASE("rank-check structures: forced L values on a saved bundle") {
  const VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json");
  Td3Config td3;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, fam.max_actuators(),
                 td3, 36);
  const std::string path = "/tmp/synctl_rank_ckpt.bin";
  save_policy(path, nets, {}, {});

  const auto r1 = rank_check(path, fam, "hopper_4", 120, "1", 3);
  CHECK(r1.num_synergies == 1);
  CHECK(r1.measured_rank <= 1);
  CHECK(r1.pass);
  const auto rk = rank_check(path, fam, "hopper_4", 120, "K", 3);
  CHECK(rk.num_synergies == 4);
  CHECK(rk.pass);
  const auto rc = rank_check(path, fam, "hopper_4", 120, "current", 3);
  CHECK(rc.pass);
  CHECK_THROWS_WITH_AS(rank_check(path, fam, "hopper_4", 10, "weird", 3),
                       doctest::Contains("ConfigInvalid"), Error);
}

TEST_CASE("training seed run produces the full artifact set") {
  RunConfig config;
  config.family_path = std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json";
  config.mode = Mode::kSolar;
  config.total_steps = 900;
  config.seeds = {3};
  config.out_dir = "/tmp/synctl_train_smoke";
  config.net = tiny_net();
  config.td3.batch_size = 32;
  config.td3.random_steps = 200;
  config.td3.update_every = 4;
  config.synergy_period = 400;
  config.dq_batch = 16;
  config.checkpoint_every = 400;
  fs::remove_all(config.out_dir);

  const auto res = run_training_seed(config, 3);
  CHECK(fs::exists(res.checkpoint));
  CHECK(fs::exists(config.out_dir + "/seed_3/metrics.csv"));
  CHECK(fs::exists(config.out_dir + "/seed_3/synergy.csv"));
  CHECK(fs::exists(config.out_dir + "/seed_3/config.json"));
  CHECK(fs::exists(config.out_dir + "/seed_3/ckpt_400.bin"));
  CHECK(fs::exists(config.out_dir + "/seed_3/ckpt_800.bin"));

  // metrics parse: schema line, header, data rows with 8 columns
  std::ifstream in(config.out_dir + "/seed_3/metrics.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema: metrics/1");
  std::getline(in, line);
  CHECK(line.rfind("step,robot_id,", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) {
    int commas = 0;
    for (char c : line)
      if (c == ',') ++commas;
    CHECK(commas == 7);
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("monolithic runs omit synergy artifacts and leave the column empty") {
  RunConfig config;
  config.family_path = std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json";
  config.mode = Mode::kMonolithic;
  config.total_steps = 500;
  config.out_dir = "/tmp/synctl_mono_smoke";
  config.net = tiny_net();
  config.td3.batch_size = 32;
  config.td3.random_steps = 200;
  config.td3.update_every = 4;
  fs::remove_all(config.out_dir);

  const auto res = run_training_seed(config, 0);
  CHECK(fs::exists(res.checkpoint));
  CHECK_FALSE(fs::exists(config.out_dir + "/seed_0/synergy.csv"));

  std::ifstream in(config.out_dir + "/seed_0/metrics.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    // num_synergies and synergy_version cells are empty: row ends ",,"
    CHECK(line.substr(line.size() - 2) == ",,");
    ++rows;
  }
  CHECK(rows > 0);

  // monolithic checkpoints evaluate too
  const VariantFamily fam = load_family(config.family_path);
  auto evals = evaluate_checkpoint(res.checkpoint, fam, {"hopper_5"}, 1, 2);
  CHECK(std::isfinite(evals[0].mean_return));
}

TEST_CASE("ablation modes train end to end") {
  RunConfig config;
  config.family_path = std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json";
  config.total_steps = 600;
  config.net = tiny_net();
  config.td3.batch_size = 32;
  config.td3.random_steps = 200;
  config.td3.update_every = 4;
  config.synergy_period = 250;
  config.dq_batch = 16;

  SUBCASE("mask_only") {
    config.mode = Mode::kMaskOnly;
    config.out_dir = "/tmp/synctl_maskonly_smoke";
    fs::remove_all(config.out_dir);
    const auto res = run_training_seed(config, 1);
    CHECK(fs::exists(res.checkpoint));
    CHECK(fs::exists(config.out_dir + "/seed_1/synergy.csv"));
    const VariantFamily fam = load_family(config.family_path);
    auto evals = evaluate_checkpoint(res.checkpoint, fam, {"hopper_3"}, 1, 4);
    CHECK(std::isfinite(evals[0].mean_return));
  }
  SUBCASE("no_preference") {
    config.mode = Mode::kNoPreference;
    config.out_dir = "/tmp/synctl_nopref_smoke";
    fs::remove_all(config.out_dir);
    const auto res = run_training_seed(config, 1);
    CHECK(fs::exists(res.checkpoint));
    // refreshes happened from morphology alone
    std::ifstream in(config.out_dir + "/seed_1/synergy.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#' && line.rfind("step,", 0) != 0) ++rows;
    CHECK(rows >= 3 + 4 + 5);  // at least the warm-up rows for all three robots
  }
}
