#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "synctl/graph.hpp"
#include "synctl/morphology.hpp"
#include "synctl/rng.hpp"
#include "synctl/synergy.hpp"

namespace synctl {

enum class Mode { kSolar, kMaskOnly, kNoPreference, kMonolithic };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

// True for modes whose observations carry the normalized traversal triples
// (the transformation-matrix path is only wired in the synergy-aware modes).
inline bool mode_augments_observations(Mode m) {
  return m == Mode::kMaskOnly || m == Mode::kMonolithic;
}

struct NetConfig {
  int d_model = 128;         // per-actuator embedding width
  int heads = 2;
  int ffn_hidden = 256;      // transformer feedforward width
  int embed_size = 128;      // traversal embedding width s
  int relation_hidden = 128; // relation network hidden width
  int relation_out = 128;    // relation network output width per slot
  int intra_layers = 1;
  int inter_layers = 2;
  int critic_head_hidden = 256;
  int mlp_hidden = 256;      // monolithic baseline hidden width

  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
};

// Static per-robot description shared by every forward pass.
struct RobotSpec {
  std::string robot_id;
  int num_actuators = 0;
  std::vector<TraversalTriple> triples;
};

RobotSpec robot_spec(const MorphologyGraph& g);

// ---------------------------------------------------------------------------
// Synergy-aware networks. All forwards take a flattened batch: `states` is
// (B*K) x obs_dim with sample-major rows, outputs follow the same layout.
// ---------------------------------------------------------------------------

struct SolarActorFwd {
  Var actions;          // (B*K) x 1, every entry in [-1,1], columns of T
  Var synergy_actions;  // (B*L) x 1, tanh-squashed
  Var t_matrix;         // K x L
  Var prepool;          // (B*K) x d, intra-attention output before pooling
};

ParameterSet init_solar_actor(const NetConfig& cfg, int obs_dim, int pool_size,
                              std::uint64_t seed);
ParameterSet init_solar_critic(const NetConfig& cfg, int obs_dim, std::uint64_t seed);

SolarActorFwd solar_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                                  Var states, int batch, const SynergyStructure& structure,
                                  const RobotSpec& robot);

// Transformation matrix T (K x L): traversal triples index the embedding pool,
// the relation network maps each selected embedding, the concatenated outputs
// form per-actuator representations, H = rep rep^T, and T column l is the mean
// of H columns in synergy l.
Var build_transformation(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                         const std::vector<TraversalTriple>& triples,
                         const std::vector<int>& assignment, int num_synergies);

// Same column-averaging applied to explicit representations (K x r); the
// dot-product matrix route used by build_transformation, exposed for tests.
Var transformation_from_reps(Graph& g, Var reps, const std::vector<int>& assignment,
                             int num_synergies);

// Twin Q heads, each B x 1.
std::pair<Var, Var> solar_critic_forward(Graph& g, const NetConfig& cfg,
                                         const ParameterSet& ps, Var states, Var actions,
                                         int batch, const SynergyStructure& structure);
// Single head (actor improvement path), B x 1. `twin` selects q1 or q2.
Var solar_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var states,
                      Var actions, int batch, const SynergyStructure& structure, int twin);

// ---------------------------------------------------------------------------
// Ablation: per-actuator transformer with the synergy mask in its first
// attention layer only; no pooling, no transformation matrix.
// ---------------------------------------------------------------------------

ParameterSet init_masked_actor(const NetConfig& cfg, int obs_dim, std::uint64_t seed);
ParameterSet init_masked_critic(const NetConfig& cfg, int obs_dim, std::uint64_t seed);

Var masked_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                         Var states, int batch, const SynergyStructure& structure);
std::pair<Var, Var> masked_critic_forward(Graph& g, const NetConfig& cfg,
                                          const ParameterSet& ps, Var states, Var actions,
                                          int batch, const SynergyStructure& structure);
Var masked_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var states,
                       Var actions, int batch, const SynergyStructure& structure, int twin);

// ---------------------------------------------------------------------------
// Monolithic baseline: plain MLPs over zero-padded flat observations.
// ---------------------------------------------------------------------------

ParameterSet init_mono_actor(const NetConfig& cfg, int flat_obs_dim, int max_actuators,
                             std::uint64_t seed);
ParameterSet init_mono_critic(const NetConfig& cfg, int flat_obs_dim, int max_actuators,
                              std::uint64_t seed);

// flat_obs: B x flat_obs_dim -> B x max_actuators (tanh-bounded)
Var mono_actor_forward(Graph& g, const NetConfig& cfg, const ParameterSet& ps,
                       Var flat_obs);
std::pair<Var, Var> mono_critic_forward(Graph& g, const NetConfig& cfg,
                                        const ParameterSet& ps, Var flat_obs,
                                        Var flat_actions);
Var mono_critic_head(Graph& g, const NetConfig& cfg, const ParameterSet& ps, Var flat_obs,
                     Var flat_actions, int twin);

}  // namespace synctl
