#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "synctl/td3.hpp"

using namespace synctl;

namespace {

NetConfig tiny_net() {
  NetConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_hidden = 16;
  cfg.embed_size = 6;
  cfg.relation_hidden = 8;
  cfg.relation_out = 6;
  cfg.critic_head_hidden = 16;
  cfg.mlp_hidden = 24;
  return cfg;
}

MorphologyGraph chain_morph(int k, const std::string& id = "chain") {
  MorphologyGraph g;
  g.robot_id = id;
  g.state_dim = LinkWorld::kBaseStateDim;
  for (int i = 0; i < k; ++i) g.parent.push_back(i == 0 ? kRootSentinel : i - 1);
  return g;
}

// constant-Q critics: zero every weight, set the head biases
void make_constant_critics(NetBundle& nets, double c1, double c2) {
  ParameterSet critic = nets.critic_params().clone();
  for (const auto& [name, t] : critic)
    critic.set(name, Tensor(t.rows(), t.cols()));
  critic.set("q1/head2/b", Tensor::scalar(c1));
  critic.set("q2/head2/b", Tensor::scalar(c2));
  nets.load_critic(std::move(critic));  // targets become clones
}

Transition make_transition(int k, double reward, bool done, Rng& rng) {
  Transition t;
  t.states = oracles::random_tensor(k, LinkWorld::kBaseStateDim, rng);
  t.actions = oracles::random_tensor(k, 1, rng);
  t.next_states = oracles::random_tensor(k, LinkWorld::kBaseStateDim, rng);
  t.reward = reward;
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("replay buffer: FIFO eviction and uniform sampling stay in range") {
  Rng rng(51);
  ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) {
    Transition t = make_transition(2, i, false, rng);
    buf.push(std::move(t));
  }
  CHECK(buf.size() == 5);
  // oldest three evicted: remaining rewards are 3..7
  std::vector<double> rewards;
  for (std::size_t i = 0; i < buf.size(); ++i) rewards.push_back(buf.at(i).reward);
  std::sort(rewards.begin(), rewards.end());
  CHECK(rewards == std::vector<double>{3, 4, 5, 6, 7});

  auto idx = buf.sample_indices(100, rng);
  for (auto i : idx) CHECK(i < buf.size());

  auto recent = buf.recent_states(3);
  CHECK(recent.size() == 3);
}

TEST_CASE("observation augmentation by mode") {
  MorphologyGraph morph = chain_morph(3);
  RobotSpec spec = robot_spec(morph);
  Rng rng(52);
  Tensor base = oracles::random_tensor(3, LinkWorld::kBaseStateDim, rng);

  Tensor solar = assemble_observation(Mode::kSolar, base, spec);
  CHECK(solar.cols() == LinkWorld::kBaseStateDim);

  Tensor masked = assemble_observation(Mode::kMaskOnly, base, spec);
  CHECK(masked.cols() == LinkWorld::kBaseStateDim + 3);
  // normalized triple of actuator 0 on the 3-chain: pre=0, in=2, post=2
  CHECK(masked.at(0, LinkWorld::kBaseStateDim + 0) == 0.0);
  CHECK(masked.at(0, LinkWorld::kBaseStateDim + 1) == 1.0);
  CHECK(masked.at(0, LinkWorld::kBaseStateDim + 2) == 1.0);
}

TEST_CASE("targets: terminal and zero-discount cases collapse to the reward") {
  const int k = 3;
  MorphologyGraph morph = chain_morph(k);
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("chain", k, 0);

  Rng rng(53);
  ReplayBuffer buf(100);
  for (int i = 0; i < 10; ++i) buf.push(make_transition(k, 1.5, true, rng));

  Td3Config td3;
  td3.batch_size = 10;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, td3, 99);

  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  BatchTensors batch = assemble_batch(buf, idx, Mode::kSolar, spec);

  SUBCASE("done = 1 gives y = r exactly") {
    Rng trng(54);
    auto y = nets.compute_targets(batch, st, spec, trng);
    for (double v : y) CHECK(v == 1.5);
  }
  SUBCASE("gamma = 0 gives y = r exactly") {
    Td3Config zero_gamma = td3;
    zero_gamma.gamma = 0.0;
    NetBundle nets2(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, zero_gamma, 100);
    // non-terminal batch
    ReplayBuffer buf2(100);
    Rng rng2(55);
    for (int i = 0; i < 10; ++i) buf2.push(make_transition(k, -0.25, false, rng2));
    BatchTensors b2 = assemble_batch(buf2, idx, Mode::kSolar, spec);
    Rng trng(56);
    auto y = nets2.compute_targets(b2, st, spec, trng);
    for (double v : y) CHECK(v == -0.25);
  }
}

TEST_CASE("targets use the minimum of the twin critics") {
  const int k = 2;
  MorphologyGraph morph = chain_morph(k);
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("chain", k, 0);

  Td3Config td3;
  td3.batch_size = 4;
  td3.gamma = 0.9;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, td3, 101);
  make_constant_critics(nets, -2.0, 3.0);  // c1 < c2

  Rng rng(57);
  ReplayBuffer buf(10);
  for (int i = 0; i < 4; ++i) buf.push(make_transition(k, 1.0, false, rng));
  BatchTensors batch = assemble_batch(buf, {0, 1, 2, 3}, Mode::kSolar, spec);
  Rng trng(58);
  auto y = nets.compute_targets(batch, st, spec, trng);
  for (double v : y) CHECK(v == doctest::Approx(1.0 + 0.9 * -2.0).epsilon(1e-12));
}

TEST_CASE("actor parameters stay bit-identical between delayed updates") {
  const int k = 2;
  MorphologyGraph morph = chain_morph(k);
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("chain", k, 0);

  Td3Config td3;
  td3.batch_size = 8;
  td3.policy_delay = 2;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, td3, 103);

  Rng rng(59);
  ReplayBuffer buf(100);
  for (int i = 0; i < 20; ++i) buf.push(make_transition(k, 0.1, false, rng));

  ParameterSet before = nets.actor_params().clone();
  Rng srng(60), trng(61);
  // update_count = 1: 1 % 2 != 0, so no actor update
  StepMetrics m = train_step(nets, buf, st, spec, td3, 1, srng, trng);
  CHECK_FALSE(m.actor_loss.has_value());
  for (const auto& [name, t] : before) {
    const Tensor& after = nets.actor_params().at(name);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(after.data()[i] == t.data()[i]);
  }

  // update_count = 2: actor moves
  StepMetrics m2 = train_step(nets, buf, st, spec, td3, 2, srng, trng);
  CHECK(m2.actor_loss.has_value());
}

TEST_CASE("target networks move only via polyak averaging") {
  const int k = 2;
  MorphologyGraph morph = chain_morph(k);
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("chain", k, 0);

  Td3Config td3;
  td3.batch_size = 8;
  td3.lr = 1e-3;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, td3, 105);

  Rng rng(70);
  ReplayBuffer buf(50);
  for (int i = 0; i < 8; ++i) buf.push(make_transition(k, 0.3, false, rng));
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  BatchTensors batch = assemble_batch(buf, idx, Mode::kSolar, spec);

  auto targets_with_seed = [&](std::uint64_t s) {
    Rng trng(s);
    return nets.compute_targets(batch, st, spec, trng);
  };
  const auto y0 = targets_with_seed(71);

  // online updates alone leave target outputs untouched
  std::vector<double> dummy(8, 0.0);
  for (int i = 0; i < 5; ++i) {
    nets.critic_update(batch, dummy, st, spec);
    nets.actor_update(batch, st, spec);
  }
  CHECK(targets_with_seed(71) == y0);

  // polyak shifts them
  nets.polyak_targets();
  CHECK(targets_with_seed(71) != y0);
}

TEST_CASE("polyak_update equation") {
  ParameterSet target, online;
  target.add("w", Tensor::full(2, 2, 1.0));
  online.add("w", Tensor::full(2, 2, 3.0));
  polyak_update(target, online, 0.25);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(target.at("w").at(i, j) == doctest::Approx(0.25 * 3.0 + 0.75 * 1.0).epsilon(1e-15));
}

TEST_CASE("critic loss decreases on a fixed batch with stationary targets") {
  const int k = 3;
  MorphologyGraph morph = chain_morph(k);
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("chain", k, 0);

  Td3Config td3;
  td3.batch_size = 16;
  td3.lr = 1e-4;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim, k, td3, 107);

  Rng rng(62);
  ReplayBuffer buf(32);
  for (int i = 0; i < 16; ++i) buf.push(make_transition(k, rng.uniform(-1, 1), false, rng));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 16; ++i) idx.push_back(i);
  BatchTensors batch = assemble_batch(buf, idx, Mode::kSolar, spec);
  std::vector<double> targets(16);
  for (int i = 0; i < 16; ++i) targets[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);

  double prev = nets.critic_update(batch, targets, st, spec);
  int decreases = 0;
  for (int step = 0; step < 100; ++step) {
    const double loss = nets.critic_update(batch, targets, st, spec);
    if (loss < prev) ++decreases;
    prev = loss;
  }
  CHECK(decreases == 100);
}

TEST_CASE("rollout: determinism, horizon bound, buffer growth") {
  VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json");
  LinkWorld env = make_env(fam, "hopper_3");
  RobotSpec spec = robot_spec(fam.variant("hopper_3").morphology);
  SynergyStructure st = SynergyStructure::warmup("hopper_3", 3, 0);

  Td3Config td3;
  NetBundle nets(Mode::kSolar, tiny_net(), LinkWorld::kBaseStateDim,
                 fam.max_actuators(), td3, 109);

  SUBCASE("deterministic rollouts repeat exactly") {
    Rng n1(63), n2(63);
    auto a = rollout(env, nets, st, spec, ExplorePolicy::kDeterministic, 0.0, 200,
                     nullptr, n1, 5);
    auto b = rollout(env, nets, st, spec, ExplorePolicy::kDeterministic, 0.0, 200,
                     nullptr, n2, 5);
    CHECK(a.episode_return == b.episode_return);
    CHECK(a.steps == b.steps);
  }
  SUBCASE("random policy: finite return, bounded length, transitions recorded") {
    ReplayBuffer buf(5000);
    Rng noise(64);
    auto stats = rollout(env, nets, st, spec, ExplorePolicy::kUniformRandom, 0.0, 2000,
                         &buf, noise, 6);
    CHECK(std::isfinite(stats.episode_return));
    CHECK(stats.steps <= 1000);
    CHECK(buf.size() == static_cast<std::size_t>(stats.steps));
  }
}

TEST_CASE("trainer: multi-task round-robin grows all buffers and emits rows") {
  VariantFamily fam =
      load_family(std::string(SYNCTL_SOURCE_DIR) + "/fixtures/hopper3.json");
  fam.params.horizon = 100;  // short episodes so every robot gets turns
  TrainerConfig cfg;
  cfg.mode = Mode::kSolar;
  cfg.net = tiny_net();
  cfg.td3.batch_size = 16;
  cfg.td3.random_steps = 50;
  cfg.td3.update_every = 4;
  cfg.total_steps = 700;
  cfg.synergy.period = 200;
  cfg.synergy.dq_batch = 16;
  cfg.seed = 11;

  Trainer trainer(fam, fam.train_ids, cfg);
  std::vector<EpisodeRow> episodes;
  std::vector<SynergyRow> synergy_rows;
  trainer.run([&](const EpisodeRow& r) { episodes.push_back(r); },
              [&](const SynergyRow& r) { synergy_rows.push_back(r); }, nullptr);

  CHECK(trainer.global_step() >= 700);
  std::set<std::string> seen;
  for (const auto& r : episodes) seen.insert(r.robot_id);
  CHECK(seen.size() == 3);  // all three hoppers collected episodes
  // warm-up structures exported for every robot (version 0)
  int warmup_rows = 0;
  for (const auto& r : synergy_rows)
    if (r.version == 0) ++warmup_rows;
  CHECK(warmup_rows == 3 + 4 + 5);
}

TEST_CASE("bandit with quadratic reward: learned action near the optimum") {
  // single-actuator stateless task, reward -(a - 0.5)^2; terminal every step
  const int k = 1;
  MorphologyGraph morph = chain_morph(k, "bandit");
  RobotSpec spec = robot_spec(morph);
  SynergyStructure st = SynergyStructure::warmup("bandit", k, 0);

  Td3Config td3;
  td3.batch_size = 32;
  td3.lr = 1e-3;
  td3.sigma_explore = 0.2;
  NetConfig net = tiny_net();
  NetBundle nets(Mode::kSolar, net, LinkWorld::kBaseStateDim, k, td3, 111);

  Tensor obs(k, LinkWorld::kBaseStateDim);  // fixed observation
  obs.at(0, 3) = 1.0;
  obs.at(0, 8) = 1.0;

  Rng explore(65), srng(66), trng(67);
  ReplayBuffer buf(100000);
  const int total = 50000;
  for (int step = 0; step < total; ++step) {
    double a;
    if (step < 500) {
      a = explore.uniform(-1, 1);
    } else {
      a = nets.act(obs, st, spec).at(0, 0);
      a = std::clamp(a + explore.normal(0.0, td3.sigma_explore), -1.0, 1.0);
    }
    Transition t;
    t.states = obs;
    t.actions = Tensor::full(1, 1, a);
    t.reward = -(a - 0.5) * (a - 0.5);
    t.next_states = obs;
    t.done = true;
    buf.push(std::move(t));
    if (step >= 500 && step % 2 == 0)
      train_step(nets, buf, st, spec, td3, step / 2, srng, trng);
  }
  const double learned = nets.act(obs, st, spec).at(0, 0);
  CHECK(std::fabs(learned - 0.5) < 0.05);
}

TEST_CASE("batch assembly rejects mixed robots") {
  Rng rng(68);
  ReplayBuffer buf(10);
  buf.push(make_transition(3, 0, false, rng));
  buf.push(make_transition(4, 0, false, rng));
  MorphologyGraph morph = chain_morph(3);
  RobotSpec spec = robot_spec(morph);
  CHECK_THROWS_WITH_AS(assemble_batch(buf, {0, 1}, Mode::kSolar, spec),
                       doctest::Contains("MixedRobots"), Error);
}
