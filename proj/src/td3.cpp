#include "synctl/td3.hpp"
#include <cstdio>

#include <algorithm>
#include <cmath>

namespace synctl {

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  require(!data_.empty(), "EmptyBatch", "sampling from an empty buffer");
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.uniform_index(data_.size());
  return out;
}

std::vector<Tensor> ReplayBuffer::recent_states(std::size_t n) const {
  require(!data_.empty(), "EmptyBatch", "no transitions recorded");
  const std::size_t take = std::min(n, data_.size());
  std::vector<Tensor> out;
  out.reserve(take);
  // walk backwards from the most recent write
  std::size_t idx = (next_ + data_.size() - 1) % data_.size();
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back(data_[idx].states);
    idx = (idx + data_.size() - 1) % data_.size();
  }
  return out;
}

Tensor assemble_observation(Mode mode, const Tensor& base_obs, const RobotSpec& robot) {
  if (!mode_augments_observations(mode)) return base_obs;
  const int k = robot.num_actuators;
  require(base_obs.rows() % k == 0, "ShapeMismatch", "observation rows");
  const int batch = base_obs.rows() / k;
  const double denom = std::max(1, k - 1);
  Tensor out(base_obs.rows(), base_obs.cols() + 3);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < k; ++i) {
      const int row = b * k + i;
      for (int j = 0; j < base_obs.cols(); ++j) out.at(row, j) = base_obs.at(row, j);
      const auto& t = robot.triples[static_cast<std::size_t>(i)];
      out.at(row, base_obs.cols() + 0) = t.pre / denom;
      out.at(row, base_obs.cols() + 1) = t.in / denom;
      out.at(row, base_obs.cols() + 2) = t.post / denom;
    }
  return out;
}

int observation_dim(Mode mode, int base_dim) {
  return mode_augments_observations(mode) ? base_dim + 3 : base_dim;
}

BatchTensors assemble_batch(const ReplayBuffer& buffer,
                            const std::vector<std::size_t>& indices, Mode mode,
                            const RobotSpec& robot) {
  require(!indices.empty(), "EmptyBatch", "empty index list");
  const int k = robot.num_actuators;
  const int base_ds = buffer.at(indices.front()).states.cols();
  const int batch = static_cast<int>(indices.size());

  Tensor states(batch * k, base_ds), next_states(batch * k, base_ds);
  Tensor actions(batch * k, 1);
  BatchTensors out;
  out.batch = batch;
  out.rewards.resize(static_cast<std::size_t>(batch));
  out.dones.resize(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const Transition& t = buffer.at(indices[static_cast<std::size_t>(b)]);
    require(t.states.rows() == k, "MixedRobots", "transition K mismatch in batch");
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < base_ds; ++j) {
        states.at(b * k + i, j) = t.states.at(i, j);
        next_states.at(b * k + i, j) = t.next_states.at(i, j);
      }
      actions.at(b * k + i, 0) = t.actions.at(i, 0);
    }
    out.rewards[static_cast<std::size_t>(b)] = t.reward;
    out.dones[static_cast<std::size_t>(b)] = t.done ? 1.0 : 0.0;
  }
  out.states = assemble_observation(mode, states, robot);
  out.next_states = assemble_observation(mode, next_states, robot);
  out.actions = std::move(actions);
  return out;
}

// ---------------------------------------------------------------------------
// NetBundle
// ---------------------------------------------------------------------------

NetBundle::NetBundle(Mode mode, NetConfig cfg, int base_obs_dim, int max_actuators,
                     const Td3Config& td3, std::uint64_t seed)
    : mode_(mode),
      cfg_(cfg),
      base_obs_dim_(base_obs_dim),
      obs_dim_(observation_dim(mode, base_obs_dim)),
      max_actuators_(max_actuators),
      td3_(td3),
      actor_opt_(td3.lr, td3.grad_clip),
      critic_opt_(td3.lr, td3.grad_clip) {
  const std::uint64_t s = derive_seed(seed, "init/" + mode_name(mode));
  switch (mode_) {
    case Mode::kSolar:
    case Mode::kNoPreference:
      actor_ = init_solar_actor(cfg_, obs_dim_, max_actuators_, s);
      critic_ = init_solar_critic(cfg_, obs_dim_, s + 1);
      break;
    case Mode::kMaskOnly:
      actor_ = init_masked_actor(cfg_, obs_dim_, s);
      critic_ = init_masked_critic(cfg_, obs_dim_, s + 1);
      break;
    case Mode::kMonolithic:
      actor_ = init_mono_actor(cfg_, obs_dim_ * max_actuators_, max_actuators_, s);
      critic_ = init_mono_critic(cfg_, obs_dim_ * max_actuators_, max_actuators_, s + 1);
      break;
  }
  actor_target_ = actor_.clone();
  critic_target_ = critic_.clone();
}

void NetBundle::load_actor(ParameterSet ps) {
  actor_ = std::move(ps);
  actor_target_ = actor_.clone();
}

void NetBundle::load_critic(ParameterSet ps) {
  critic_ = std::move(ps);
  critic_target_ = critic_.clone();
}

Tensor NetBundle::flatten_obs(const Tensor& states, int batch, int k) const {
  const int ds = states.cols();
  Tensor out(batch, max_actuators_ * ds);  // zero-padded
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < ds; ++j) out.at(b, i * ds + j) = states.at(b * k + i, j);
  return out;
}

Tensor NetBundle::flatten_actions(const Tensor& actions, int batch, int k) const {
  Tensor out(batch, max_actuators_);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < k; ++i) out.at(b, i) = actions.at(b * k + i, 0);
  return out;
}

NetBundle::ActorGraphOut NetBundle::actor_graph(Graph& g, const ParameterSet& ps,
                                                Var states, int batch,
                                                const SynergyStructure& structure,
                                                const RobotSpec& robot) const {
  // per-actuator modes only; the monolithic baseline runs on flat tensors
  ActorGraphOut out;
  switch (mode_) {
    case Mode::kSolar:
    case Mode::kNoPreference:
      out.actions = solar_actor_forward(g, cfg_, ps, states, batch, structure, robot).actions;
      break;
    case Mode::kMaskOnly:
      out.actions = masked_actor_forward(g, cfg_, ps, states, batch, structure);
      break;
    case Mode::kMonolithic:
      raise("ConfigInvalid", "monolithic mode has no per-actuator actor graph");
  }
  return out;
}

Var NetBundle::critic_graph_head(Graph& g, const ParameterSet& ps, Var states, Var actions,
                                 int batch, const SynergyStructure& structure,
                                 const RobotSpec& robot, int twin) const {
  switch (mode_) {
    case Mode::kSolar:
    case Mode::kNoPreference:
      return solar_critic_head(g, cfg_, ps, states, actions, batch, structure, twin);
    case Mode::kMaskOnly:
      return masked_critic_head(g, cfg_, ps, states, actions, batch, structure, twin);
    case Mode::kMonolithic:
      raise("ConfigInvalid", "monolithic mode has no per-actuator critic graph");
  }
  raise("ConfigInvalid", "unhandled mode");
}

// B x p mask zeroing the action columns this robot does not own
Tensor NetBundle::mono_action_mask(int batch, int k) const {
  Tensor m(batch, max_actuators_);
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < k; ++i) m.at(b, i) = 1.0;
  return m;
}

Tensor NetBundle::act(const Tensor& base_obs, const SynergyStructure& structure,
                      const RobotSpec& robot) const {
  Graph g;
  const Tensor obs = assemble_observation(mode_, base_obs, robot);
  const int k = robot.num_actuators;
  if (mode_ == Mode::kMonolithic) {
    Var flat = g.constant(flatten_obs(obs, 1, k));
    const Tensor& acts = g.value(mono_actor_forward(g, cfg_, actor_, flat));
    Tensor out(k, 1);
    for (int i = 0; i < k; ++i) out.at(i, 0) = acts.at(0, i);
    return out;
  }
  Var states = g.constant(obs);
  Var actions = actor_graph(g, actor_, states, 1, structure, robot).actions;
  return g.value(actions).clone();
}

NetBundle::ActorEval NetBundle::act_full(const Tensor& base_obs,
                                         const SynergyStructure& structure,
                                         const RobotSpec& robot) const {
  ActorEval out;
  Graph g;
  Var states = g.constant(assemble_observation(mode_, base_obs, robot));
  if (mode_ == Mode::kSolar || mode_ == Mode::kNoPreference) {
    const SolarActorFwd fwd =
        solar_actor_forward(g, cfg_, actor_, states, 1, structure, robot);
    out.actions = g.value(fwd.actions).clone();
    out.synergy_actions = g.value(fwd.synergy_actions).clone();
    out.t_matrix = g.value(fwd.t_matrix).clone();
    out.prepool = g.value(fwd.prepool).clone();
  } else {
    out.actions = g.value(actor_graph(g, actor_, states, 1, structure, robot).actions).clone();
  }
  return out;
}

std::pair<double, double> NetBundle::q_pair(const Tensor& base_obs, const Tensor& actions,
                                            const SynergyStructure& structure,
                                            const RobotSpec& robot) const {
  Graph g;
  const Tensor obs = assemble_observation(mode_, base_obs, robot);
  if (mode_ == Mode::kMonolithic) {
    const int k = robot.num_actuators;
    Var fs = g.constant(flatten_obs(obs, 1, k));
    Var fa = g.constant(flatten_actions(actions, 1, k));
    Var q1 = mono_critic_head(g, cfg_, critic_, fs, fa, 0);
    Var q2 = mono_critic_head(g, cfg_, critic_, fs, fa, 1);
    return {g.value(q1).item(), g.value(q2).item()};
  }
  Var s = g.constant(obs);
  Var a = g.constant(actions);
  Var q1 = critic_graph_head(g, critic_, s, a, 1, structure, robot, 0);
  Var q2 = critic_graph_head(g, critic_, s, a, 1, structure, robot, 1);
  return {g.value(q1).item(), g.value(q2).item()};
}

double NetBundle::q_min(const Tensor& base_obs, const Tensor& actions,
                        const SynergyStructure& structure, const RobotSpec& robot) const {
  const auto [q1, q2] = q_pair(base_obs, actions, structure, robot);
  return std::min(q1, q2);
}

std::vector<double> NetBundle::compute_targets(const BatchTensors& batch,
                                               const SynergyStructure& structure,
                                               const RobotSpec& robot, Rng& rng) const {
  require(batch.batch > 0, "EmptyBatch", "target computation");
  const int b = batch.batch;
  const int k = robot.num_actuators;

  // target action with clipped smoothing noise, clamped to bounds
  Tensor next_actions(b * k, 1);
  {
    Graph g;
    if (mode_ == Mode::kMonolithic) {
      Var flat = g.constant(flatten_obs(batch.next_states, b, k));
      const Tensor& acts = g.value(mono_actor_forward(g, cfg_, actor_target_, flat));
      for (int s = 0; s < b; ++s)
        for (int i = 0; i < k; ++i) next_actions.at(s * k + i, 0) = acts.at(s, i);
    } else {
      Var ns = g.constant(batch.next_states);
      next_actions =
          g.value(actor_graph(g, actor_target_, ns, b, structure, robot).actions).clone();
    }
  }
  for (int i = 0; i < b * k; ++i) {
    const double eps = std::clamp(rng.normal(0.0, td3_.sigma_target), -td3_.noise_clip,
                                  td3_.noise_clip);
    next_actions.at(i, 0) = std::clamp(next_actions.at(i, 0) + eps, -1.0, 1.0);
  }

  Graph g;
  Var q1, q2;
  if (mode_ == Mode::kMonolithic) {
    Var fs = g.constant(flatten_obs(batch.next_states, b, k));
    Var fa = g.constant(flatten_actions(next_actions, b, k));
    q1 = mono_critic_head(g, cfg_, critic_target_, fs, fa, 0);
    q2 = mono_critic_head(g, cfg_, critic_target_, fs, fa, 1);
  } else {
    Var ns = g.constant(batch.next_states);
    Var na = g.constant(next_actions);
    q1 = critic_graph_head(g, critic_target_, ns, na, b, structure, robot, 0);
    q2 = critic_graph_head(g, critic_target_, ns, na, b, structure, robot, 1);
  }
  const Tensor& t1 = g.value(q1);
  const Tensor& t2 = g.value(q2);

  std::vector<double> y(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const double qmin = std::min(t1.at(i, 0), t2.at(i, 0));
    y[static_cast<std::size_t>(i)] =
        batch.rewards[static_cast<std::size_t>(i)] +
        td3_.gamma * (1.0 - batch.dones[static_cast<std::size_t>(i)]) * qmin;
  }
  return y;
}

double NetBundle::critic_update(const BatchTensors& batch,
                                const std::vector<double>& targets,
                                const SynergyStructure& structure,
                                const RobotSpec& robot) {
  Graph g;
  Var q1, q2;
  if (mode_ == Mode::kMonolithic) {
    const int k = robot.num_actuators;
    Var fs = g.constant(flatten_obs(batch.states, batch.batch, k));
    Var fa = g.constant(flatten_actions(batch.actions, batch.batch, k));
    q1 = mono_critic_head(g, cfg_, critic_, fs, fa, 0);
    q2 = mono_critic_head(g, cfg_, critic_, fs, fa, 1);
  } else {
    Var s = g.constant(batch.states);
    Var a = g.constant(batch.actions);
    q1 = critic_graph_head(g, critic_, s, a, batch.batch, structure, robot, 0);
    q2 = critic_graph_head(g, critic_, s, a, batch.batch, structure, robot, 1);
  }
  Tensor y(batch.batch, 1);
  for (int i = 0; i < batch.batch; ++i) y.at(i, 0) = targets[static_cast<std::size_t>(i)];
  Var target = g.constant(y);
  Var loss = g.add(g.mse(q1, target), g.mse(q2, target));
  g.backward(loss);
  critic_opt_.step(critic_, g.param_grads(critic_));
  return g.value(loss).item();
}

double NetBundle::actor_update(const BatchTensors& batch,
                               const SynergyStructure& structure,
                               const RobotSpec& robot) {
  Graph g;
  Var loss;
  if (mode_ == Mode::kMonolithic) {
    const int k = robot.num_actuators;
    Var fs = g.constant(flatten_obs(batch.states, batch.batch, k));
    Var acts = mono_actor_forward(g, cfg_, actor_, fs);  // B x p
    // zero the columns this robot does not own, matching stored transitions
    Var masked = g.mul(acts, g.constant(mono_action_mask(batch.batch, k)));
    Var q1 = mono_critic_head(g, cfg_, critic_, fs, masked, 0);
    loss = g.scale(g.mean_all(q1), -1.0);
  } else {
    Var s = g.constant(batch.states);
    Var actions = actor_graph(g, actor_, s, batch.batch, structure, robot).actions;
    Var q1 = critic_graph_head(g, critic_, s, actions, batch.batch, structure, robot, 0);
    loss = g.scale(g.mean_all(q1), -1.0);
  }
  g.backward(loss);
  actor_opt_.step(actor_, g.param_grads(actor_));
  return g.value(loss).item();
}

void NetBundle::polyak_targets() {
  polyak_update(actor_target_, actor_, td3_.tau);
  polyak_update(critic_target_, critic_, td3_.tau);
}

StepMetrics train_step(NetBundle& nets, const ReplayBuffer& buffer,
                       const SynergyStructure& structure, const RobotSpec& robot,
                       const Td3Config& cfg, std::int64_t update_count, Rng& sample_rng,
                       Rng& target_rng) {
  require(buffer.size() >= static_cast<std::size_t>(cfg.batch_size), "EmptyBatch",
          "robot has insufficient transitions for a batch");
  const auto indices =
      buffer.sample_indices(static_cast<std::size_t>(cfg.batch_size), sample_rng);
  const BatchTensors batch = assemble_batch(buffer, indices, nets.mode(), robot);

  StepMetrics metrics;
  const auto targets = nets.compute_targets(batch, structure, robot, target_rng);
  metrics.critic_loss = nets.critic_update(batch, targets, structure, robot);
  if (update_count % cfg.policy_delay == 0) {
    metrics.actor_loss = nets.actor_update(batch, structure, robot);
    nets.polyak_targets();
  }
  return metrics;
}

EpisodeStats rollout(LinkWorld& env, const NetBundle& nets,
                     const SynergyStructure& structure, const RobotSpec& robot,
                     ExplorePolicy explore, double sigma_explore, int max_steps,
                     ReplayBuffer* buffer, Rng& noise_rng, std::uint64_t reset_seed) {
  env.reset(reset_seed);
  const int k = env.num_actuators();
  EpisodeStats stats;
  Tensor obs = env.observe();
  for (int t = 0; t < max_steps; ++t) {
    Tensor actions(k, 1);
    switch (explore) {
      case ExplorePolicy::kUniformRandom:
        for (int i = 0; i < k; ++i) actions.at(i, 0) = noise_rng.uniform(-1.0, 1.0);
        break;
      case ExplorePolicy::kNoisyActor: {
        actions = nets.act(obs, structure, robot);
        for (int i = 0; i < k; ++i)
          actions.at(i, 0) = std::clamp(
              actions.at(i, 0) + noise_rng.normal(0.0, sigma_explore), -1.0, 1.0);
        break;
      }
      case ExplorePolicy::kDeterministic:
        actions = nets.act(obs, structure, robot);
        break;
    }
    const StepResult res = env.step(actions);
    Tensor next_obs = env.observe();
    if (buffer) {
      Transition tr;
      tr.states = obs;
      tr.actions = actions;
      tr.reward = res.reward;
      tr.next_states = next_obs;
      tr.done = res.done && env.state().t < env.params().horizon;  // true terminals only
      buffer->push(std::move(tr));
    }
    stats.episode_return += res.reward;
    stats.steps += 1;
    obs = std::move(next_obs);
    if (res.done) {
      stats.fell = env.state().t < env.params().horizon;
      break;
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const VariantFamily& family, std::vector<std::string> train_ids,
                 TrainerConfig config)
    : config_(config),
      train_ids_(std::move(train_ids)),
      explore_rng_(derive_seed(config.seed, "explore")),
      sample_rng_(derive_seed(config.seed, "sample")),
      target_rng_(derive_seed(config.seed, "target")) {
  require(!train_ids_.empty(), "ConfigInvalid", "no train variants");
  for (const auto& id : train_ids_) {
    Task task{id,
              make_env(family, id),
              robot_spec(family.variant(id).morphology),
              nullptr,
              ReplayBuffer(config_.td3.buffer_capacity)};
    if (config_.mode != Mode::kMonolithic) {
      SynergyConfig sc = config_.synergy;
      if (config_.mode == Mode::kNoPreference) sc.mode = RefreshMode::kNoPreference;
      task.synergy = std::make_unique<SynergyManager>(family.variant(id).morphology, sc);
    }
    tasks_.push_back(std::move(task));
  }
  nets_ = std::make_unique<NetBundle>(config_.mode, config_.net,
                                      LinkWorld::kBaseStateDim, family.max_actuators(),
                                      config_.td3, config_.seed);
}

const SynergyStructure& Trainer::structure(const std::string& robot_id) const {
  for (const auto& t : tasks_)
    if (t.id == robot_id) {
      require(t.synergy != nullptr, "ConfigInvalid", "mode has no synergy structures");
      return t.synergy->structure();
    }
  raise("ConfigInvalid", "unknown robot " + robot_id);
}

const RobotSpec& Trainer::spec(const std::string& robot_id) const {
  for (const auto& t : tasks_)
    if (t.id == robot_id) return t.spec;
  raise("ConfigInvalid", "unknown robot " + robot_id);
}

void Trainer::emit_structure(const Task& task, const SynergySink& on_synergy) {
  if (!on_synergy || !task.synergy) return;
  const SynergyStructure& s = task.synergy->structure();
  for (int i = 0; i < s.num_actuators(); ++i) {
    SynergyRow row;
    row.step = task.robot_steps;
    row.robot_id = task.id;
    row.version = s.version;
    row.actuator = i;
    row.synergy_index = s.assignment[static_cast<std::size_t>(i)];
    row.is_center =
        std::find(s.centers.begin(), s.centers.end(), i) != s.centers.end();
    on_synergy(row);
  }
}

void Trainer::maybe_refresh(Task& task, const SynergySink& on_synergy) {
  if (!task.synergy) return;
  if (task.robot_steps < task.synergy->structure().frozen_until) return;
  if (task.buffer.size() == 0) return;  // nothing to estimate from yet

  const RobotSpec& spec = task.spec;
  const SynergyStructure structure = task.synergy->structure();
  CriticValueFn critic = [&](const Tensor& states, const Tensor& actions) {
    return nets_->q_min(states, actions, structure, spec);
  };
  ActorFn actor = [&](const Tensor& states) {
    return nets_->act(states, structure, spec);
  };
  const auto states = task.buffer.recent_states(
      static_cast<std::size_t>(config_.synergy.dq_batch));
  const auto outcome = task.synergy->refresh(task.robot_steps, critic, actor, states);
  if (outcome.installed) {
    emit_structure(task, on_synergy);
  } else if (outcome.attempted && !outcome.converged) {
    std::fprintf(stderr,
                 "synergy refresh for %s at step %lld did not converge; keeping v%lld\n",
                 task.id.c_str(), static_cast<long long>(task.robot_steps),
                 static_cast<long long>(task.synergy->structure().version));
  }
}

void Trainer::run(const EpisodeSink& on_episode, const SynergySink& on_synergy,
                  const StepHook& after_episode) {
  // the warm-up structure is part of the exported evolution
  for (const auto& task : tasks_) emit_structure(task, on_synergy);

  while (global_step_ < config_.total_steps) {
    for (auto& task : tasks_) {
      if (global_step_ >= config_.total_steps) break;
      maybe_refresh(task, on_synergy);

      const SynergyStructure structure =
          task.synergy ? task.synergy->structure()
                       : SynergyStructure::warmup(task.id, task.spec.num_actuators, 0);
      const int remaining =
          static_cast<int>(config_.total_steps - global_step_);
      const int budget = std::min(task.env.params().horizon, remaining);
      const ExplorePolicy explore = global_step_ < config_.td3.random_steps
                                        ? ExplorePolicy::kUniformRandom
                                        : ExplorePolicy::kNoisyActor;
      const std::uint64_t reset_seed =
          derive_seed(config_.seed, "episode/" + task.id + "/" +
                                        std::to_string(task.episodes));
      const EpisodeStats stats =
          rollout(task.env, *nets_, structure, task.spec, explore,
                  config_.td3.sigma_explore, budget, &task.buffer, explore_rng_,
                  reset_seed);
      global_step_ += stats.steps;
      task.robot_steps += stats.steps;
      task.episodes += 1;

      // gradient steps proportional to collected env steps
      update_credit_ += stats.steps;
      const std::int64_t updates = update_credit_ / config_.td3.update_every;
      update_credit_ -= updates * config_.td3.update_every;
      if (task.buffer.size() >= static_cast<std::size_t>(config_.td3.batch_size)) {
        for (std::int64_t u = 0; u < updates; ++u) {
          const StepMetrics m =
              train_step(*nets_, task.buffer, structure, task.spec, config_.td3,
                         update_count_, sample_rng_, target_rng_);
          ++update_count_;
          task.loss_acc += m.critic_loss;
          task.loss_count += 1;
          if (m.actor_loss) {
            task.actor_loss_acc += *m.actor_loss;
            task.actor_loss_count += 1;
          }
        }
      }

      if (on_episode) {
        EpisodeRow row;
        row.step = global_step_;
        row.robot_id = task.id;
        row.episode_return = stats.episode_return;
        row.episode_len = stats.steps;
        row.critic_loss = task.loss_count ? task.loss_acc / task.loss_count : 0.0;
        row.actor_loss =
            task.actor_loss_count ? task.actor_loss_acc / task.actor_loss_count : 0.0;
        task.loss_acc = task.actor_loss_acc = 0.0;
        task.loss_count = task.actor_loss_count = 0;
        if (task.synergy) {
          row.num_synergies = task.synergy->structure().num_synergies;
          row.synergy_version = task.synergy->structure().version;
        }
        on_episode(row);
      }
      if (after_episode) after_episode(global_step_);
    }
  }
}

}  // namespace synctl
