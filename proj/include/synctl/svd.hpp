#pragma once

#include <vector>

#include "synctl/tensor.hpp"

namespace synctl {

// Singular values of an N x K matrix (K small), descending, via one-sided
// Jacobi rotations; accurate for small singular values, unlike the Gram route.
std::vector<double> singular_values(const Tensor& m);

// Count of singular values above rel_tol * sigma_max.
int numerical_rank(const Tensor& m, double rel_tol = 1e-8);

}  // namespace synctl
