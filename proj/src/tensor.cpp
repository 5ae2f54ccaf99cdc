#include "synctl/tensor.hpp"

#include <cmath>

namespace synctl {

bool Tensor::all_finite() const {
  for (double v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : *data_) m = std::max(m, std::fabs(v));
  return m;
}

Tensor gemm_nn(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "ShapeMismatch", "gemm_nn inner dims");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c(m, n);
  const double* __restrict__ pa = a.data();
  const double* __restrict__ pb = b.data();
  double* __restrict__ pc = c.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    double* ci = pc + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      if (av == 0.0) continue;
      const double* bk = pb + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  return c;
}

Tensor gemm_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "ShapeMismatch", "gemm_nt inner dims");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c(m, n);
  const double* __restrict__ pa = a.data();
  const double* __restrict__ pb = b.data();
  double* __restrict__ pc = c.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    double* ci = pc + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = pb + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
      ci[j] = s;
    }
  }
  return c;
}

Tensor gemm_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "ShapeMismatch", "gemm_tn inner dims");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c(k, n);
  const double* __restrict__ pa = a.data();
  const double* __restrict__ pb = b.data();
  double* __restrict__ pc = c.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    const double* bi = pb + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      if (av == 0.0) continue;
      double* ck = pc + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ck[j] += av * bi[j];
    }
  }
  return c;
}

void axpy(Tensor& y, double alpha, const Tensor& x) {
  require(y.same_shape(x), "ShapeMismatch", "axpy shape");
  double* __restrict__ py = y.data();
  const double* __restrict__ px = x.data();
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) py[i] += alpha * px[i];
}

}  // namespace synctl
