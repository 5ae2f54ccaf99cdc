#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synctl/linkworld.hpp"
#include "synctl/optim.hpp"
#include "synctl/policy.hpp"
#include "synctl/synergy.hpp"

namespace synctl {

// One environment step. Observations are stored as produced by the
// environment (base layout); mode-specific augmentation happens at batch
// assembly, so re-clusterings and mode wiring never invalidate the buffer.
struct Transition {
  Tensor states;       // K x base_ds
  Tensor actions;      // K x 1
  double reward = 0.0;
  Tensor next_states;  // K x base_ds
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  const Transition& at(std::size_t i) const { return data_[i]; }
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  // newest-first state blocks for delta-Q estimation
  std::vector<Tensor> recent_states(std::size_t n) const;

 private:
  std::vector<Transition> data_;
  std::size_t capacity_;
  std::size_t next_ = 0;
};

struct Td3Config {
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double sigma_target = 0.2;
  double noise_clip = 0.5;
  double sigma_explore = 0.1;
  int batch_size = 100;
  double lr = 1e-4;
  double grad_clip = 0.1;
  std::size_t buffer_capacity = 1000000;
  int random_steps = 1000;   // uniform-random exploration warmup (global env steps)
  int update_every = 1;      // env steps per gradient step
};

// Appends the normalized traversal triple of each actuator for modes whose
// observations carry structural features; identity for the synergy-aware
// modes, where structure enters through the transformation matrix instead.
Tensor assemble_observation(Mode mode, const Tensor& base_obs, const RobotSpec& robot);
int observation_dim(Mode mode, int base_dim);

// Sample-major flattened batch for one robot.
struct BatchTensors {
  int batch = 0;
  Tensor states;       // (B*K) x obs_dim
  Tensor actions;      // (B*K) x 1
  Tensor next_states;  // (B*K) x obs_dim
  std::vector<double> rewards;
  std::vector<double> dones;
};

BatchTensors assemble_batch(const ReplayBuffer& buffer,
                            const std::vector<std::size_t>& indices, Mode mode,
                            const RobotSpec& robot);

// Actor/critic networks with their targets and optimizers for one family.
// Parameters are shared across robots; per-robot context (structure, triples)
// arrives with each call.
class NetBundle {
 public:
  NetBundle(Mode mode, NetConfig cfg, int base_obs_dim, int max_actuators,
            const Td3Config& td3, std::uint64_t seed);

  Mode mode() const { return mode_; }
  const NetConfig& net_config() const { return cfg_; }
  int max_actuators() const { return max_actuators_; }
  int base_obs_dim() const { return base_obs_dim_; }

  // Deterministic action, K x 1, from a base-layout observation block.
  Tensor act(const Tensor& base_obs, const SynergyStructure& structure,
             const RobotSpec& robot) const;

  struct ActorEval {
    Tensor actions;                       // K x 1
    std::optional<Tensor> synergy_actions;  // L x 1 (synergy-aware modes)
    std::optional<Tensor> t_matrix;         // K x L
    std::optional<Tensor> prepool;          // K x d
  };
  ActorEval act_full(const Tensor& base_obs, const SynergyStructure& structure,
                     const RobotSpec& robot) const;

  // Conservative value min(Q1, Q2) of one (state, action) pair, online critic.
  double q_min(const Tensor& base_obs, const Tensor& actions,
               const SynergyStructure& structure, const RobotSpec& robot) const;
  std::pair<double, double> q_pair(const Tensor& base_obs, const Tensor& actions,
                                   const SynergyStructure& structure,
                                   const RobotSpec& robot) const;

  // TD3 target values y for a batch; noise is clipped per actuator.
  std::vector<double> compute_targets(const BatchTensors& batch,
                                      const SynergyStructure& structure,
                                      const RobotSpec& robot, Rng& rng) const;

  double critic_update(const BatchTensors& batch, const std::vector<double>& targets,
                       const SynergyStructure& structure, const RobotSpec& robot);
  double actor_update(const BatchTensors& batch, const SynergyStructure& structure,
                      const RobotSpec& robot);
  void polyak_targets();

  const ParameterSet& actor_params() const { return actor_; }
  const ParameterSet& critic_params() const { return critic_; }
  void load_actor(ParameterSet ps);
  void load_critic(ParameterSet ps);

 private:
  struct ActorGraphOut {
    Var actions;  // (B*K) x 1
  };
  ActorGraphOut actor_graph(Graph& g, const ParameterSet& ps, Var states, int batch,
                            const SynergyStructure& structure,
                            const RobotSpec& robot) const;
  Var critic_graph_head(Graph& g, const ParameterSet& ps, Var states, Var actions,
                        int batch, const SynergyStructure& structure,
                        const RobotSpec& robot, int twin) const;
  // flat views for the monolithic baseline
  Tensor flatten_obs(const Tensor& states, int batch, int k) const;
  Tensor flatten_actions(const Tensor& actions, int batch, int k) const;
  Tensor mono_action_mask(int batch, int k) const;

  Mode mode_;
  NetConfig cfg_;
  int base_obs_dim_, obs_dim_, max_actuators_;
  Td3Config td3_;
  ParameterSet actor_, critic_, actor_target_, critic_target_;
  Adam actor_opt_, critic_opt_;
};

struct StepMetrics {
  double critic_loss = 0.0;
  std::optional<double> actor_loss;
};

// One critic update (and a delayed actor/target update) on a uniform batch
// from this robot's buffer. update_count indexes critic updates globally.
StepMetrics train_step(NetBundle& nets, const ReplayBuffer& buffer,
                       const SynergyStructure& structure, const RobotSpec& robot,
                       const Td3Config& cfg, std::int64_t update_count, Rng& sample_rng,
                       Rng& target_rng);

struct EpisodeStats {
  double episode_return = 0.0;
  int steps = 0;
  bool fell = false;
};

enum class ExplorePolicy { kUniformRandom, kNoisyActor, kDeterministic };

// Runs one episode (or until max_steps), optionally appending transitions.
EpisodeStats rollout(LinkWorld& env, const NetBundle& nets,
                     const SynergyStructure& structure, const RobotSpec& robot,
                     ExplorePolicy explore, double sigma_explore, int max_steps,
                     ReplayBuffer* buffer, Rng& noise_rng, std::uint64_t reset_seed);

// ---------------------------------------------------------------------------
// Multi-task trainer: round-robin episodes over the train variants, gradient
// steps proportional to collected steps, periodic synergy refresh per robot.
// ---------------------------------------------------------------------------

struct TrainerConfig {
  Mode mode = Mode::kSolar;
  NetConfig net;
  Td3Config td3;
  SynergyConfig synergy;
  std::int64_t total_steps = 200000;
  std::uint64_t seed = 0;
};

struct EpisodeRow {
  std::int64_t step = 0;  // global env steps at episode end
  std::string robot_id;
  double episode_return = 0.0;
  int episode_len = 0;
  double critic_loss = 0.0;     // mean since the robot's previous row
  double actor_loss = 0.0;
  int num_synergies = 0;        // 0 for monolithic
  std::int64_t synergy_version = -1;  // -1 for monolithic
};

struct SynergyRow {
  std::int64_t step = 0;
  std::string robot_id;
  std::int64_t version = 0;
  int actuator = 0;
  int synergy_index = 0;
  bool is_center = false;
};

class Trainer {
 public:
  Trainer(const VariantFamily& family, std::vector<std::string> train_ids,
          TrainerConfig config);

  using EpisodeSink = std::function<void(const EpisodeRow&)>;
  using SynergySink = std::function<void(const SynergyRow&)>;
  using StepHook = std::function<void(std::int64_t global_step)>;

  void run(const EpisodeSink& on_episode, const SynergySink& on_synergy,
           const StepHook& after_episode);

  const NetBundle& nets() const { return *nets_; }
  NetBundle& nets() { return *nets_; }
  const std::vector<std::string>& train_ids() const { return train_ids_; }
  const SynergyStructure& structure(const std::string& robot_id) const;
  const RobotSpec& spec(const std::string& robot_id) const;
  std::int64_t global_step() const { return global_step_; }

 private:
  struct Task {
    std::string id;
    LinkWorld env;
    RobotSpec spec;
    std::unique_ptr<SynergyManager> synergy;
    ReplayBuffer buffer;
    std::int64_t robot_steps = 0;
    std::int64_t episodes = 0;
    double loss_acc = 0.0;
    double actor_loss_acc = 0.0;
    int loss_count = 0;
    int actor_loss_count = 0;
  };

  void maybe_refresh(Task& task, const SynergySink& on_synergy);
  void emit_structure(const Task& task, const SynergySink& on_synergy);

  TrainerConfig config_;
  std::vector<std::string> train_ids_;
  std::vector<Task> tasks_;
  std::unique_ptr<NetBundle> nets_;
  Rng explore_rng_, sample_rng_, target_rng_;
  std::int64_t global_step_ = 0;
  std::int64_t update_count_ = 0;
  std::int64_t update_credit_ = 0;
};

}  // namespace synctl
