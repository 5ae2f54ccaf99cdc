#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "synctl/error.hpp"

namespace synctl {

// Dense row-major float64 matrix. Buffers are shared on copy and treated as
// immutable once an op has produced them; mutation happens only on freshly
// allocated tensors (kernels, initializers, the optimizer).
class Tensor {
 public:
  Tensor() : rows_(0), cols_(0), data_(std::make_shared<std::vector<double>>()) {}

  Tensor(int rows, int cols)
      : rows_(rows),
        cols_(cols),
        data_(std::make_shared<std::vector<double>>(
            static_cast<std::size_t>(rows) * cols, 0.0)) {
    require(rows >= 0 && cols >= 0, "ShapeMismatch", "negative dimension");
  }

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

  static Tensor full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    for (auto& x : *t.data_) x = v;
    return t;
  }

  static Tensor scalar(double v) { return full(1, 1, v); }

  static Tensor from_vector(const std::vector<double>& v, int rows, int cols) {
    require(static_cast<std::size_t>(rows) * cols == v.size(), "ShapeMismatch",
            "from_vector size mismatch");
    Tensor t(rows, cols);
    *t.data_ = v;
    return t;
  }

  static Tensor column(const std::vector<double>& v) {
    return from_vector(v, static_cast<int>(v.size()), 1);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_->size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }

  double& at(int i, int j) { return (*data_)[static_cast<std::size_t>(i) * cols_ + j]; }
  const double& at(int i, int j) const {
    return (*data_)[static_cast<std::size_t>(i) * cols_ + j];
  }

  double item() const {
    require(size() == 1, "ShapeMismatch", "item() on non-scalar tensor");
    return (*data_)[0];
  }

  // Deep copy with a fresh buffer.
  Tensor clone() const {
    Tensor t(rows_, cols_);
    *t.data_ = *data_;
    return t;
  }

  bool all_finite() const;
  double max_abs() const;

 private:
  int rows_, cols_;
  std::shared_ptr<std::vector<double>> data_;
};

// C = A * B
Tensor gemm_nn(const Tensor& a, const Tensor& b);
// C = A * B^T
Tensor gemm_nt(const Tensor& a, const Tensor& b);
// C = A^T * B
Tensor gemm_tn(const Tensor& a, const Tensor& b);

// y += alpha * x, shapes equal
void axpy(Tensor& y, double alpha, const Tensor& x);

// Named collection of learnable tensors plus the optimizer step counter.
// std::map keeps iteration order stable (sorted by name).
class ParameterSet {
 public:
  void add(const std::string& name, Tensor t) {
    require(params_.find(name) == params_.end(), "ShapeMismatch",
            "duplicate parameter name " + name);
    params_.emplace(name, std::move(t));
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "ShapeMismatch", "unknown parameter " + name);
    return it->second;
  }

  void set(const std::string& name, Tensor t) {
    auto it = params_.find(name);
    require(it != params_.end(), "ShapeMismatch", "unknown parameter " + name);
    it->second = std::move(t);
  }

  std::size_t count() const { return params_.size(); }

  // Value-equal, storage-independent copy.
  ParameterSet clone() const {
    ParameterSet out;
    out.step_ = step_;
    for (const auto& [name, t] : params_) out.params_.emplace(name, t.clone());
    return out;
  }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
  std::int64_t step_ = 0;
};

using GradMap = std::map<std::string, Tensor>;

}  // namespace synctl
