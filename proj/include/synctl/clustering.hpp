#pragma once

#include <optional>
#include <vector>

#include "synctl/morphology.hpp"

namespace synctl {

// KxK similarity: affinities off-diagonal, preferences on the diagonal.
struct SimilarityMatrix {
  int n = 0;
  std::vector<double> s;  // row-major

  double at(int i, int j) const { return s[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return s[static_cast<std::size_t>(i) * n + j]; }

  static SimilarityMatrix zeros(int n) {
    SimilarityMatrix m;
    m.n = n;
    m.s.assign(static_cast<std::size_t>(n) * n, 0.0);
    return m;
  }
};

struct ClusterResult {
  std::vector<int> exemplar_of;           // length K, exemplar_of[c] == c for centers
  std::vector<std::vector<int>> clusters; // partition of 0..K-1, ordered by center
  std::vector<int> centers;               // sorted exemplar indices
  int iterations_run = 0;
  bool converged = false;
};

struct ApOptions {
  int max_iter = 200;
  double damping = 0.5;      // new = damping*old + (1-damping)*raw
  int stable_window = 15;    // unchanged assignments before declaring convergence
};

// Affinity propagation over an explicit similarity matrix. Assignments are
// finalized by nearest-exemplar similarity; argmax ties break to the lowest
// index. Non-convergence is reported, not thrown.
ClusterResult affinity_propagation(const SimilarityMatrix& s, const ApOptions& opt = {});

// Off-diagonal exp(-D); diagonal from `preference`, or the median of the
// off-diagonal entries when absent.
SimilarityMatrix build_similarity(const DistanceMatrix& d,
                                  const std::optional<std::vector<double>>& preference);

}  // namespace synctl
