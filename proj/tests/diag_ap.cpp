// Scratch diagnostic for affinity propagation vs brute force (not a test).
#include <cstdio>

#include "oracles.hpp"
#include "synctl/clustering.hpp"

using namespace synctl;

namespace {
SimilarityMatrix random_instance(int k, Rng& rng) {
  std::vector<double> xs(k), ys(k);
  const int blobs = 1 + static_cast<int>(rng.uniform_index(3));
  std::vector<std::pair<double, double>> centers;
  for (int b = 0; b < blobs; ++b) centers.emplace_back(rng.uniform(-4, 4), rng.uniform(-4, 4));
  for (int i = 0; i < k; ++i) {
    const auto& c = centers[rng.uniform_index(centers.size())];
    xs[i] = c.first + rng.normal(0, 0.8);
    ys[i] = c.second + rng.normal(0, 0.8);
  }
  SimilarityMatrix s = SimilarityMatrix::zeros(k);
  std::vector<double> off;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) {
        const double dx = xs[i] - xs[j], dy = ys[i] - ys[j];
        s.at(i, j) = -(dx * dx + dy * dy);
        off.push_back(s.at(i, j));
      }
  std::sort(off.begin(), off.end());
  const double med = 0.5 * (off[(off.size() - 1) / 2] + off[off.size() / 2]);
  for (int i = 0; i < k; ++i) s.at(i, i) = med;
  return s;
}

double objective(const SimilarityMatrix& s, const std::vector<int>& assign) {
  double obj = 0.0;
  for (int i = 0; i < s.n; ++i) obj += s.at(i, assign[i]);
  return obj;
}
}  // namespace

int main() {
  Rng rng(34);
  int tested = 0, failed = 0, skipped_tie = 0, skipped_conv = 0, trials = 0;
  while (tested + skipped_tie + skipped_conv < 400 && trials < 400) {
    ++trials;
    const int k = 3 + static_cast<int>(rng.uniform_index(6));
    SimilarityMatrix s = random_instance(k, rng);
    auto brute = oracles::brute_force_ap(s);
    if (brute.objective - brute.runner_up < 1e-6 * std::fabs(brute.objective) + 1e-9) {
      ++skipped_tie;
      continue;
    }
    ClusterResult r = affinity_propagation(s);
    if (!r.converged) {
      ++skipped_conv;
      continue;
    }
    ++tested;
    if (r.exemplar_of != brute.exemplar_of) {
      ++failed;
      const double gap = brute.objective - objective(s, r.exemplar_of);
      std::printf("FAIL trial=%d k=%d gap=%.6g rel=%.3g brute_gap_to_runner=%.6g iters=%d\n",
                  trials, k, gap, gap / std::fabs(brute.objective),
                  brute.objective - brute.runner_up, r.iterations_run);
    }
  }
  std::printf("tested=%d failed=%d skipped_tie=%d skipped_nonconv=%d trials=%d\n", tested,
              failed, skipped_tie, skipped_conv, trials);
  return 0;
}
