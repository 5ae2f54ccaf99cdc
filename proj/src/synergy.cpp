#include "synctl/synergy.hpp"

#include <algorithm>
#include <cmath>

namespace synctl {

BoolMat synergy_mask(const std::vector<int>& assignment) {
  const int k = static_cast<int>(assignment.size());
  BoolMat m(k, false);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      m.set(i, j, assignment[static_cast<std::size_t>(i)] ==
                      assignment[static_cast<std::size_t>(j)]);
  return m;
}

SynergyStructure SynergyStructure::warmup(const std::string& robot_id, int k,
                                          std::int64_t frozen_until) {
  require(k >= 1, "InvalidMorphology", "warmup structure needs K >= 1");
  SynergyStructure s;
  s.robot_id = robot_id;
  s.num_synergies = 1;
  s.assignment.assign(static_cast<std::size_t>(k), 0);
  s.centers = {0};
  s.mask = synergy_mask(s.assignment);
  s.version = 0;
  s.frozen_until = frozen_until;
  return s;
}

SynergyStructure structure_from_clusters(const std::string& robot_id,
                                         const ClusterResult& clusters,
                                         std::int64_t version,
                                         std::int64_t frozen_until) {
  SynergyStructure s;
  s.robot_id = robot_id;
  s.centers = clusters.centers;
  s.num_synergies = static_cast<int>(clusters.centers.size());
  s.assignment.assign(clusters.exemplar_of.size(), -1);
  for (std::size_t i = 0; i < clusters.exemplar_of.size(); ++i) {
    const auto it = std::lower_bound(s.centers.begin(), s.centers.end(),
                                     clusters.exemplar_of[i]);
    s.assignment[i] = static_cast<int>(it - s.centers.begin());
  }
  s.mask = synergy_mask(s.assignment);
  s.version = version;
  s.frozen_until = frozen_until;
  return s;
}

std::vector<double> estimate_delta_q(const CriticValueFn& critic, const ActorFn& actor,
                                     const std::vector<Tensor>& states,
                                     double default_action) {
  require(!states.empty(), "EmptyBatch", "delta-Q estimation needs transitions");
  const int k = states.front().rows();
  for (const Tensor& s : states)
    require(s.rows() == k && s.cols() == states.front().cols(), "MixedRobots",
            "state blocks of different shapes in one batch");

  std::vector<double> dq(static_cast<std::size_t>(k), 0.0);
  for (const Tensor& s : states) {
    const Tensor a = actor(s);
    require(a.rows() == k && a.cols() == 1, "ShapeMismatch", "actor output shape");
    const double q_base = critic(s, a);
    for (int i = 0; i < k; ++i) {
      Tensor mod = a.clone();
      mod.at(i, 0) = default_action;
      dq[static_cast<std::size_t>(i)] += q_base - critic(s, mod);
    }
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  for (double& v : dq) v *= inv;
  return dq;
}

std::vector<double> to_preference(const std::vector<double>& dq) {
  double mx = dq.front();
  for (double v : dq) mx = std::max(mx, v);
  std::vector<double> out(dq.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < dq.size(); ++i) {
    out[i] = std::exp(dq[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

SynergyManager::SynergyManager(const MorphologyGraph& morphology, SynergyConfig config)
    : config_(config),
      robot_id_(morphology.robot_id),
      num_actuators_(morphology.num_actuators()),
      distances_(shortest_distances(build_adjacency(morphology))),
      structure_(SynergyStructure::warmup(morphology.robot_id,
                                          morphology.num_actuators(), config.period)) {}

SynergyManager::RefreshOutcome SynergyManager::refresh(
    std::int64_t step, const CriticValueFn& critic, const ActorFn& actor,
    const std::vector<Tensor>& recent_states) {
  RefreshOutcome out;
  if (config_.mode == RefreshMode::kFrozen || step < structure_.frozen_until)
    return out;
  out.attempted = true;

  std::optional<std::vector<double>> preference;
  if (config_.mode == RefreshMode::kFull) {
    const auto dq = estimate_delta_q(critic, actor, recent_states);
    preference = to_preference(dq);
  }
  const SimilarityMatrix s = build_similarity(distances_, preference);
  const ClusterResult clusters = affinity_propagation(s, config_.ap);
  out.converged = clusters.converged;

  // freeze either way; a non-converged run keeps the previous structure and
  // retries a full period later
  const std::int64_t next_frozen = step + config_.period;
  if (!clusters.converged) {
    structure_.frozen_until = next_frozen;
    return out;
  }
  structure_ = structure_from_clusters(robot_id_, clusters, structure_.version + 1,
                                       next_frozen);
  out.installed = true;
  return out;
}

SynergyStructure morphology_only_structure(const MorphologyGraph& morphology,
                                           const ApOptions& ap) {
  const DistanceMatrix d = shortest_distances(build_adjacency(morphology));
  const ClusterResult clusters = affinity_propagation(build_similarity(d, std::nullopt), ap);
  return structure_from_clusters(morphology.robot_id, clusters, 0, 0);
}

}  // namespace synctl
