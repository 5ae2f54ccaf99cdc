#include "synctl/svd.hpp"

#include <algorithm>
#include <cmath>

namespace synctl {

std::vector<double> singular_values(const Tensor& m) {
  const int n = m.rows(), k = m.cols();
  require(n > 0 && k > 0, "ShapeMismatch", "singular_values of empty matrix");
  // work on a column-major copy for contiguous column access
  std::vector<std::vector<double>> col(static_cast<std::size_t>(k),
                                       std::vector<double>(static_cast<std::size_t>(n)));
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = m.at(i, j);

  // one-sided Jacobi: rotate column pairs until mutually orthogonal
  const double eps = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool converged = true;
    for (int p = 0; p < k - 1; ++p) {
      for (int q = p + 1; q < k; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < n; ++i) {
          const double x = col[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)];
          const double y = col[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)];
          app += x * x;
          aqq += y * y;
          apq += x * y;
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
        converged = false;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < n; ++i) {
          const double x = col[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)];
          const double y = col[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)];
          col[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)] = c * x - s * y;
          col[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] = s * x + c * y;
        }
      }
    }
    if (converged) break;
  }

  std::vector<double> sigma(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = col[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      norm += x * x;
    }
    sigma[static_cast<std::size_t>(j)] = std::sqrt(norm);
  }
  std::sort(sigma.rbegin(), sigma.rend());
  return sigma;
}

int numerical_rank(const Tensor& m, double rel_tol) {
  const auto sigma = singular_values(m);
  const double cutoff = rel_tol * sigma.front();
  int rank = 0;
  for (double s : sigma)
    if (s > cutoff && s > 0.0) ++rank;
  return rank;
}

}  // namespace synctl
