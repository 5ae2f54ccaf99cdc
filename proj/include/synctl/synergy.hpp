#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "synctl/clustering.hpp"
#include "synctl/graph.hpp"
#include "synctl/morphology.hpp"

namespace synctl {

// Immutable snapshot of one robot's synergy partition. Readers hold the
// snapshot by value; refreshes swap in a new one between training iterations.
struct SynergyStructure {
  std::string robot_id;
  int num_synergies = 1;       // L
  std::vector<int> assignment; // actuator -> synergy index in [0, L)
  std::vector<int> centers;    // exemplar actuator per synergy, ordered
  BoolMat mask;                // M[i][j] = same synergy
  std::int64_t version = 0;
  std::int64_t frozen_until = 0;

  int num_actuators() const { return static_cast<int>(assignment.size()); }

  // All actuators in one synergy with actuator 0 as the stand-in center.
  static SynergyStructure warmup(const std::string& robot_id, int k,
                                 std::int64_t frozen_until);
};

// M[i][j] true iff assignment[i] == assignment[j].
BoolMat synergy_mask(const std::vector<int>& assignment);

SynergyStructure structure_from_clusters(const std::string& robot_id,
                                         const ClusterResult& clusters,
                                         std::int64_t version,
                                         std::int64_t frozen_until);

// Scalar conservative value of (states, actions); with twin critics this is
// the minimum of the two heads.
using CriticValueFn = std::function<double(const Tensor& states, const Tensor& actions)>;
// Deterministic policy action for one state block, K x 1.
using ActorFn = std::function<Tensor(const Tensor& states)>;

// Mean influence of each actuator on the value: for every sampled state,
// replace coordinate k of the actor's action with the default action and
// measure the drop in Q. Throws EmptyBatch / MixedRobots.
std::vector<double> estimate_delta_q(const CriticValueFn& critic, const ActorFn& actor,
                                     const std::vector<Tensor>& states,
                                     double default_action = 0.0);

// Softmax with max subtraction; entries in (0,1), summing to 1.
std::vector<double> to_preference(const std::vector<double>& dq);

enum class RefreshMode { kFull, kNoPreference, kFrozen };

struct SynergyConfig {
  std::int64_t period = 50000;  // env steps per robot between refreshes
  int dq_batch = 512;
  RefreshMode mode = RefreshMode::kFull;
  ApOptions ap;
};

// Owns one robot's synergy structure and its cached morphology distances.
// exp(-D) is constant per robot, so the similarity base is computed once.
class SynergyManager {
 public:
  SynergyManager(const MorphologyGraph& morphology, SynergyConfig config);

  const SynergyStructure& structure() const { return structure_; }
  const SynergyConfig& config() const { return config_; }
  const DistanceMatrix& distances() const { return distances_; }

  struct RefreshOutcome {
    bool attempted = false;  // false while frozen or in kFrozen mode
    bool installed = false;  // new structure swapped in
    bool converged = false;
  };

  // Periodic re-clustering. `recent_states` is the sampled batch from the
  // robot's replay data; ignored in kNoPreference mode. Inside the freeze
  // window this is a no-op, so repeated calls are idempotent.
  RefreshOutcome refresh(std::int64_t step, const CriticValueFn& critic,
                         const ActorFn& actor, const std::vector<Tensor>& recent_states);

  // Testing/eval hook: install an explicit structure snapshot.
  void set_structure(SynergyStructure s) { structure_ = std::move(s); }

 private:
  SynergyConfig config_;
  std::string robot_id_;
  int num_actuators_;
  DistanceMatrix distances_;
  SynergyStructure structure_;
};

// Morphology-only structure (median preference), used for robots that have no
// value history: held-out zero-shot variants and standalone tooling.
SynergyStructure morphology_only_structure(const MorphologyGraph& morphology,
                                           const ApOptions& ap = {});

}  // namespace synctl
