#pragma once

#include "synctl/tensor.hpp"

namespace synctl {

// Adam with bias correction. Gradients are globally norm-clipped before the
// moment updates; non-finite gradients are an error, never silently zeroed.
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double clip_norm = 0.1, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), clip_norm_(clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update in place; bumps params.step().
  void step(ParameterSet& params, const GradMap& grads);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, clip_norm_, beta1_, beta2_, eps_;
  GradMap m_, v_;
};

// Global L2 norm over a gradient map.
double grad_norm(const GradMap& grads);

// target = tau * online + (1 - tau) * target, elementwise over shared names.
void polyak_update(ParameterSet& target, const ParameterSet& online, double tau);

}  // namespace synctl
