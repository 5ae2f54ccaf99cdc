#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "synctl/tensor.hpp"

namespace synctl {

// Symmetric boolean pair mask with a true diagonal (attention gating).
struct BoolMat {
  int n = 0;
  std::vector<std::uint8_t> m;

  BoolMat() = default;
  explicit BoolMat(int dim, bool fill = false)
      : n(dim), m(static_cast<std::size_t>(dim) * dim, fill ? 1 : 0) {}

  bool at(int i, int j) const { return m[static_cast<std::size_t>(i) * n + j] != 0; }
  void set(int i, int j, bool v) { m[static_cast<std::size_t>(i) * n + j] = v ? 1 : 0; }
};

// Handle to a node on a Graph tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Eager tape-recording reverse-mode autodiff over Tensors. Single-owner,
// not shared across threads. Ops validate shapes and append one node each;
// backward() walks the tape once in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ----- leaves -----
  Var constant(Tensor v);
  Var param(const ParameterSet& ps, const std::string& name);

  // ----- elementwise / linear -----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_row(Var a, Var row);  // broadcast 1xN bias over rows
  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var transpose(Var a);
  Var tanh_(Var a);
  Var relu(Var a);

  // ----- rows / groups -----
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gain, Var bias);  // eps 1e-5
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int c0, int c1);
  Var gather_rows(Var a, std::vector<int> idx);
  // (B*K)xD -> (B*L)xD, groups given by assignment (length K, values 0..L-1)
  Var group_mean_pool(Var a, std::vector<int> assignment, int groups, int batch);

  // ----- attention -----
  // q,k,v: (B*K)xD with D = heads*head_dim. Per-sample scaled dot-product
  // attention; pairs with mask[i][j]==false get an additive -1e9 logit and
  // exactly zero post-softmax weight. mask==nullptr means full attention.
  Var attention_core(Var q, Var k, Var v, std::shared_ptr<const BoolMat> mask,
                     int batch, int tokens, int heads);

  // ----- layout -----
  Var rows_to_cols(Var a, int batch, int rows_per_sample);  // (B*L)x1 -> LxB
  Var cols_to_rows(Var a, int batch, int rows_per_sample);  // KxB -> (B*K)x1

  // Per-column rescale y = x * min(1, 1/max_i|x_i|): keeps each column inside
  // [-1,1] while staying on the same ray (column spans are preserved).
  Var bound_rescale_cols(Var a);

  // ----- reductions -----
  Var sum_all(Var a);
  Var mean_all(Var a);
  Var mse(Var a, Var b);

  // ----- execution -----
  const Tensor& value(Var v) const { return node(v.idx).value; }
  // Gradient of the last backward() target w.r.t. v (zeros if unreached).
  Tensor grad(Var v) const;
  void backward(Var loss);
  // Gradients for every parameter in ps; zero tensors for parameters that
  // were never bound or are unreachable from the loss.
  GradMap param_grads(const ParameterSet& ps) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_live = false;
    std::function<void(Graph&, int)> back;
  };

  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  Var push(Tensor value, std::function<void(Graph&, int)> back);
  // Accumulation target for node i's gradient, allocated on first touch.
  Tensor& grad_acc(int i);
  const Tensor& out_grad(int i) const { return node(i).grad; }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> bound_params_;
  bool ran_backward_ = false;
};

}  // namespace synctl
