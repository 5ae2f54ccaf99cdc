#include "synctl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace synctl {

namespace {

// argmax over r+a per row, lowest index wins ties
std::vector<int> current_assignment(const std::vector<double>& r,
                                    const std::vector<double>& a, int n) {
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int j = 0; j < n; ++j) {
      const double v = r[static_cast<std::size_t>(i) * n + j] +
                       a[static_cast<std::size_t>(i) * n + j];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

ClusterResult finalize(const SimilarityMatrix& s, const std::vector<int>& argmax,
                       int iterations, bool converged) {
  const int n = s.n;
  ClusterResult res;
  res.iterations_run = iterations;
  res.converged = converged;

  std::vector<int> centers;
  for (int i = 0; i < n; ++i)
    if (argmax[static_cast<std::size_t>(i)] == i) centers.push_back(i);
  if (centers.empty()) {
    // degenerate: no self-exemplar surfaced; fall back to the point most
    // confident in itself so the partition invariants still hold
    int best = 0;
    double bv = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double v = s.at(i, i);
      if (v > bv) {
        bv = v;
        best = i;
      }
    }
    centers.push_back(best);
  }

  res.centers = centers;
  res.exemplar_of.assign(static_cast<std::size_t>(n), -1);
  for (int c : centers) res.exemplar_of[static_cast<std::size_t>(c)] = c;
  for (int i = 0; i < n; ++i) {
    if (res.exemplar_of[static_cast<std::size_t>(i)] >= 0) continue;
    double best = -std::numeric_limits<double>::infinity();
    int arg = centers.front();
    for (int c : centers) {
      if (s.at(i, c) > best) {
        best = s.at(i, c);
        arg = c;
      }
    }
    res.exemplar_of[static_cast<std::size_t>(i)] = arg;
  }
  res.clusters.resize(centers.size());
  for (int i = 0; i < n; ++i) {
    const auto it = std::lower_bound(centers.begin(), centers.end(),
                                     res.exemplar_of[static_cast<std::size_t>(i)]);
    res.clusters[static_cast<std::size_t>(it - centers.begin())].push_back(i);
  }
  return res;
}

}  // namespace

ClusterResult affinity_propagation(const SimilarityMatrix& s, const ApOptions& opt) {
  const int n = s.n;
  require(n >= 1, "NonFiniteSimilarity", "empty similarity matrix");
  require(opt.max_iter >= 1, "NonFiniteSimilarity", "max_iter must be >= 1");
  require(opt.damping >= 0.0 && opt.damping < 1.0, "NonFiniteSimilarity",
          "damping must be in [0,1)");
  for (double v : s.s)
    require(std::isfinite(v), "NonFiniteSimilarity", "similarity entries must be finite");

  if (n == 1) {
    ClusterResult res;
    res.exemplar_of = {0};
    res.clusters = {{0}};
    res.centers = {0};
    res.iterations_run = 0;
    res.converged = true;
    return res;
  }

  const std::size_t nn = static_cast<std::size_t>(n) * n;
  std::vector<double> r(nn, 0.0), a(nn, 0.0), raw(nn, 0.0);
  std::vector<int> last_assignment = current_assignment(r, a, n);
  int stable = 0;
  int iter = 0;
  bool converged = false;

  for (iter = 1; iter <= opt.max_iter; ++iter) {
    // responsibilities: r[i][j] = s[i][j] - max_{j' != j}(a[i][j'] + s[i][j'])
    for (int i = 0; i < n; ++i) {
      double max1 = -std::numeric_limits<double>::infinity();
      double max2 = -std::numeric_limits<double>::infinity();
      int arg1 = -1;
      for (int j = 0; j < n; ++j) {
        const double v = a[static_cast<std::size_t>(i) * n + j] + s.at(i, j);
        if (v > max1) {
          max2 = max1;
          max1 = v;
          arg1 = j;
        } else if (v > max2) {
          max2 = v;
        }
      }
      for (int j = 0; j < n; ++j)
        raw[static_cast<std::size_t>(i) * n + j] = s.at(i, j) - (j == arg1 ? max2 : max1);
    }
    for (std::size_t t = 0; t < nn; ++t)
      r[t] = opt.damping * r[t] + (1.0 - opt.damping) * raw[t];

    // availabilities: a[i][j] = min(0, r[j][j] + sum_{i' not in {i,j}} max(0, r[i'][j]))
    //                 a[j][j] = sum_{i' != j} max(0, r[i'][j])
    // Positive responsibilities are summed in sorted order so the result is
    // independent of actuator labeling (exact permutation equivariance).
    std::vector<double> pos;
    for (int j = 0; j < n; ++j) {
      pos.clear();
      for (int i = 0; i < n; ++i)
        if (i != j && r[static_cast<std::size_t>(i) * n + j] > 0.0)
          pos.push_back(r[static_cast<std::size_t>(i) * n + j]);
      std::sort(pos.begin(), pos.end());
      double pos_sum = 0.0;
      for (double v : pos) pos_sum += v;
      const double rjj = r[static_cast<std::size_t>(j) * n + j];
      for (int i = 0; i < n; ++i) {
        if (i == j) {
          raw[static_cast<std::size_t>(j) * n + j] = pos_sum;
        } else {
          const double rij = std::max(0.0, r[static_cast<std::size_t>(i) * n + j]);
          double without_i;
          if (rij == 0.0) {
            without_i = pos_sum;
          } else {
            // re-sum without i, still in sorted order
            without_i = 0.0;
            bool skipped = false;
            for (double v : pos) {
              if (!skipped && v == rij) {
                skipped = true;
                continue;
              }
              without_i += v;
            }
          }
          raw[static_cast<std::size_t>(i) * n + j] = std::min(0.0, rjj + without_i);
        }
      }
    }
    for (std::size_t t = 0; t < nn; ++t)
      a[t] = opt.damping * a[t] + (1.0 - opt.damping) * raw[t];

    for (std::size_t t = 0; t < nn; ++t)
      require(std::isfinite(r[t]) && std::isfinite(a[t]), "NumericalOverflow",
              "message matrices diverged at iteration " + std::to_string(iter));

    auto assignment = current_assignment(r, a, n);
    if (assignment == last_assignment) {
      if (++stable >= opt.stable_window) {
        converged = true;
        break;
      }
    } else {
      stable = 0;
      last_assignment = std::move(assignment);
    }
  }

  return finalize(s, last_assignment, std::min(iter, opt.max_iter), converged);
}

SimilarityMatrix build_similarity(const DistanceMatrix& d,
                                  const std::optional<std::vector<double>>& preference) {
  const int n = d.n;
  require(n >= 1, "DimensionMismatch", "empty distance matrix");
  if (preference) {
    require(static_cast<int>(preference->size()) == n, "DimensionMismatch",
            "preference length " + std::to_string(preference->size()) +
                " for K=" + std::to_string(n));
    for (double v : *preference)
      require(std::isfinite(v), "NonFiniteSimilarity", "preference must be finite");
  }

  SimilarityMatrix s = SimilarityMatrix::zeros(n);
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        s.at(i, j) = std::exp(-static_cast<double>(d.at(i, j)));
        off.push_back(s.at(i, j));
      }

  double diag = 0.0;
  if (preference) {
    for (int i = 0; i < n; ++i) s.at(i, i) = (*preference)[static_cast<std::size_t>(i)];
    return s;
  }
  if (!off.empty()) {
    std::sort(off.begin(), off.end());
    const std::size_t m = off.size();
    diag = (m % 2 == 1) ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
  }
  for (int i = 0; i < n; ++i) s.at(i, i) = diag;
  return s;
}

}  // namespace synctl
