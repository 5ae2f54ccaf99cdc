#include "synctl/optim.hpp"

#include <cmath>

namespace synctl {

double grad_norm(const GradMap& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    const double* p = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) sq += p[i] * p[i];
  }
  return std::sqrt(sq);
}

void Adam::step(ParameterSet& params, const GradMap& grads) {
  for (const auto& [name, g] : grads)
    require(g.all_finite(), "NonFiniteGradient", "gradient of " + name);

  const double norm = grad_norm(grads);
  const double scale = (clip_norm_ > 0.0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;

  params.set_step(params.step() + 1);
  const auto t = static_cast<double>(params.step());
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);

  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) continue;
    const Tensor& w = params.at(name);
    require(w.same_shape(g), "ShapeMismatch", "gradient shape for " + name);

    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Tensor(w.rows(), w.cols())).first;
      v_.emplace(name, Tensor(w.rows(), w.cols()));
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);

    Tensor out = w.clone();
    double* pw = out.data();
    double* pm = m.data();
    double* pv = v.data();
    const double* pg = g.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double gi = pg[i] * scale;
      pm[i] = beta1_ * pm[i] + (1.0 - beta1_) * gi;
      pv[i] = beta2_ * pv[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = pm[i] / bc1;
      const double vhat = pv[i] / bc2;
      pw[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    params.set(name, std::move(out));
  }
}

void polyak_update(ParameterSet& target, const ParameterSet& online, double tau) {
  for (const auto& [name, w] : online) {
    if (!target.contains(name)) continue;
    const Tensor& t = target.at(name);
    require(t.same_shape(w), "ShapeMismatch", "polyak shape for " + name);
    Tensor out = t.clone();
    double* po = out.data();
    const double* pw = w.data();
    for (std::size_t i = 0; i < out.size(); ++i)
      po[i] = tau * pw[i] + (1.0 - tau) * po[i];
    target.set(name, std::move(out));
  }
}

}  // namespace synctl
