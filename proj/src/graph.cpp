#include "synctl/graph.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

namespace synctl {

namespace {
constexpr double kMaskLogit = -1e9;
constexpr double kLayerNormEps = 1e-5;
}  // namespace

Var Graph::push(Tensor value, std::function<void(Graph&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad_acc(int i) {
  Node& n = node(i);
  if (!n.grad_live) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.grad_live = true;
  }
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v.idx);
  if (n.grad_live) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

Var Graph::constant(Tensor v) { return push(std::move(v), nullptr); }

Var Graph::param(const ParameterSet& ps, const std::string& name) {
  Var v = push(ps.at(name), nullptr);
  bound_params_.emplace_back(name, v.idx);
  return v;
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "ShapeMismatch", "add");
  Tensor out = ta.clone();
  axpy(out, 1.0, tb);
  return push(std::move(out), [a, b](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    axpy(g.grad_acc(a.idx), 1.0, go);
    axpy(g.grad_acc(b.idx), 1.0, go);
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "ShapeMismatch", "sub");
  Tensor out = ta.clone();
  axpy(out, -1.0, tb);
  return push(std::move(out), [a, b](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    axpy(g.grad_acc(a.idx), 1.0, go);
    axpy(g.grad_acc(b.idx), -1.0, go);
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "ShapeMismatch", "mul");
  Tensor out(ta.rows(), ta.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = ta.data()[i] * tb.data()[i];
  return push(std::move(out), [a, b](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    Tensor& ga = g.grad_acc(a.idx);
    Tensor& gb = g.grad_acc(b.idx);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga.data()[i] += go.data()[i] * tb.data()[i];
      gb.data()[i] += go.data()[i] * ta.data()[i];
    }
  });
}

Var Graph::scale(Var a, double c) {
  Tensor out = value(a).clone();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
  return push(std::move(out), [a, c](Graph& g, int self) {
    axpy(g.grad_acc(a.idx), c, g.out_grad(self));
  });
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& ta = value(a);
  const Tensor& tr = value(row);
  require(tr.rows() == 1 && tr.cols() == ta.cols(), "ShapeMismatch", "add_row bias");
  Tensor out = ta.clone();
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out.at(i, j) += tr.at(0, j);
  return push(std::move(out), [a, row](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    axpy(g.grad_acc(a.idx), 1.0, go);
    Tensor& gr = g.grad_acc(row.idx);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) gr.at(0, j) += go.at(i, j);
  });
}

Var Graph::matmul(Var a, Var b) {
  Tensor out = gemm_nn(value(a), value(b));
  return push(std::move(out), [a, b](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    axpy(g.grad_acc(a.idx), 1.0, gemm_nt(go, g.value(b)));
    axpy(g.grad_acc(b.idx), 1.0, gemm_tn(g.value(a), go));
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  Tensor out = gemm_nt(value(a), value(b));
  return push(std::move(out), [a, b](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    axpy(g.grad_acc(a.idx), 1.0, gemm_nn(go, g.value(b)));
    axpy(g.grad_acc(b.idx), 1.0, gemm_tn(go, g.value(a)));
  });
}

Var Graph::transpose(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.cols(), ta.rows());
  for (int i = 0; i < ta.rows(); ++i)
    for (int j = 0; j < ta.cols(); ++j) out.at(j, i) = ta.at(i, j);
  return push(std::move(out), [a](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) ga.at(j, i) += go.at(i, j);
  });
}

Var Graph::tanh_(Var a) {
  Tensor out = value(a).clone();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  return push(std::move(out), [a](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& y = g.value(Var{self});
    Tensor& ga = g.grad_acc(a.idx);
    for (std::size_t i = 0; i < go.size(); ++i)
      ga.data()[i] += go.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
  });
}

Var Graph::relu(Var a) {
  Tensor out = value(a).clone();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  return push(std::move(out), [a](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_acc(a.idx);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (x.data()[i] > 0.0) ga.data()[i] += go.data()[i];
  });
}

Var Graph::softmax_rows(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.rows(), ta.cols());
  for (int i = 0; i < ta.rows(); ++i) {
    double mx = ta.at(i, 0);
    for (int j = 1; j < ta.cols(); ++j) mx = std::max(mx, ta.at(i, j));
    double denom = 0.0;
    for (int j = 0; j < ta.cols(); ++j) {
      const double e = std::exp(ta.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < ta.cols(); ++j) out.at(i, j) /= denom;
  }
  return push(std::move(out), [a](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& y = g.value(Var{self});
    Tensor& ga = g.grad_acc(a.idx);
    for (int i = 0; i < go.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < go.cols(); ++j) dot += go.at(i, j) * y.at(i, j);
      for (int j = 0; j < go.cols(); ++j)
        ga.at(i, j) += y.at(i, j) * (go.at(i, j) - dot);
    }
  });
}

Var Graph::layer_norm_rows(Var x, Var gain, Var bias) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  const int n = tx.cols();
  require(tg.rows() == 1 && tg.cols() == n, "ShapeMismatch", "layer_norm gain");
  require(tb.rows() == 1 && tb.cols() == n, "ShapeMismatch", "layer_norm bias");

  Tensor out(tx.rows(), n);
  // xhat cached for backward
  auto xhat = std::make_shared<Tensor>(tx.rows(), n);
  auto inv_sigma = std::make_shared<std::vector<double>>(tx.rows());
  for (int i = 0; i < tx.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += tx.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = tx.at(i, j) - mu;
      var += d * d;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_sigma)[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      const double h = (tx.at(i, j) - mu) * is;
      xhat->at(i, j) = h;
      out.at(i, j) = h * tg.at(0, j) + tb.at(0, j);
    }
  }
  return push(std::move(out), [x, gain, bias, xhat, inv_sigma](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& tg = g.value(gain);
    const int n = go.cols();
    Tensor& gx = g.grad_acc(x.idx);
    Tensor& gg = g.grad_acc(gain.idx);
    Tensor& gb = g.grad_acc(bias.idx);
    for (int i = 0; i < go.rows(); ++i) {
      const double is = (*inv_sigma)[static_cast<std::size_t>(i)];
      double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
      for (int j = 0; j < n; ++j) {
        const double dh = go.at(i, j) * tg.at(0, j);
        m1 += dh;
        m2 += dh * xhat->at(i, j);
        gg.at(0, j) += go.at(i, j) * xhat->at(i, j);
        gb.at(0, j) += go.at(i, j);
      }
      m1 /= n;
      m2 /= n;
      for (int j = 0; j < n; ++j) {
        const double dh = go.at(i, j) * tg.at(0, j);
        gx.at(i, j) += is * (dh - m1 - xhat->at(i, j) * m2);
      }
    }
  });
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rows() == tb.rows(), "ShapeMismatch", "concat_cols rows");
  Tensor out(ta.rows(), ta.cols() + tb.cols());
  for (int i = 0; i < ta.rows(); ++i) {
    std::memcpy(&out.at(i, 0), &ta.at(i, 0), sizeof(double) * ta.cols());
    std::memcpy(&out.at(i, ta.cols()), &tb.at(i, 0), sizeof(double) * tb.cols());
  }
  const int ca = ta.cols();
  return push(std::move(out), [a, b, ca](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    Tensor& gb = g.grad_acc(b.idx);
    for (int i = 0; i < go.rows(); ++i) {
      for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += go.at(i, j);
      for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += go.at(i, ca + j);
    }
  });
}

Var Graph::slice_cols(Var a, int c0, int c1) {
  const Tensor& ta = value(a);
  require(0 <= c0 && c0 < c1 && c1 <= ta.cols(), "ShapeMismatch", "slice_cols range");
  Tensor out(ta.rows(), c1 - c0);
  for (int i = 0; i < ta.rows(); ++i)
    std::memcpy(&out.at(i, 0), &ta.at(i, c0), sizeof(double) * (c1 - c0));
  return push(std::move(out), [a, c0](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    for (int i = 0; i < go.rows(); ++i)
      for (int j = 0; j < go.cols(); ++j) ga.at(i, c0 + j) += go.at(i, j);
  });
}

Var Graph::gather_rows(Var a, std::vector<int> idx) {
  const Tensor& ta = value(a);
  for (int i : idx)
    require(0 <= i && i < ta.rows(), "TripleOutOfRange",
            "gather index " + std::to_string(i) + " of " + std::to_string(ta.rows()));
  Tensor out(static_cast<int>(idx.size()), ta.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::memcpy(&out.at(static_cast<int>(r), 0), &ta.at(idx[r], 0),
                sizeof(double) * ta.cols());
  auto keep = std::make_shared<std::vector<int>>(std::move(idx));
  return push(std::move(out), [a, keep](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    for (std::size_t r = 0; r < keep->size(); ++r)
      for (int j = 0; j < go.cols(); ++j)
        ga.at((*keep)[r], j) += go.at(static_cast<int>(r), j);
  });
}

Var Graph::group_mean_pool(Var a, std::vector<int> assignment, int groups, int batch) {
  const Tensor& ta = value(a);
  const int per = static_cast<int>(assignment.size());
  require(per > 0 && groups >= 1, "ShapeMismatch", "group_mean_pool sizes");
  require(ta.rows() == batch * per, "ShapeMismatch", "group_mean_pool rows");
  std::vector<int> count(static_cast<std::size_t>(groups), 0);
  for (int g : assignment) {
    require(0 <= g && g < groups, "ShapeMismatch", "assignment out of range");
    ++count[static_cast<std::size_t>(g)];
  }
  for (int g = 0; g < groups; ++g)
    require(count[static_cast<std::size_t>(g)] > 0, "EmptyGroup",
            "group " + std::to_string(g) + " has no members");

  const int d = ta.cols();
  Tensor out(batch * groups, d);
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < per; ++k) {
      const int gi = assignment[static_cast<std::size_t>(k)];
      const double w = 1.0 / count[static_cast<std::size_t>(gi)];
      const double* src = &ta.at(b * per + k, 0);
      double* dst = &out.at(b * groups + gi, 0);
      for (int j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
  auto asg = std::make_shared<std::vector<int>>(std::move(assignment));
  auto cnt = std::make_shared<std::vector<int>>(std::move(count));
  return push(std::move(out), [a, asg, cnt, groups, batch, per](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    const int d = go.cols();
    for (int b = 0; b < batch; ++b) {
      for (int k = 0; k < per; ++k) {
        const int gi = (*asg)[static_cast<std::size_t>(k)];
        const double w = 1.0 / (*cnt)[static_cast<std::size_t>(gi)];
        const double* src = &go.at(b * groups + gi, 0);
        double* dst = &ga.at(b * per + k, 0);
        for (int j = 0; j < d; ++j) dst[j] += w * src[j];
      }
    }
  });
}

Var Graph::attention_core(Var q, Var k, Var v, std::shared_ptr<const BoolMat> mask,
                          int batch, int tokens, int heads) {
  const Tensor& tq = value(q);
  const Tensor& tk = value(k);
  const Tensor& tv = value(v);
  const int d = tq.cols();
  require(tq.same_shape(tk) && tq.same_shape(tv), "ShapeMismatch", "attention qkv");
  require(tq.rows() == batch * tokens, "ShapeMismatch", "attention rows");
  require(d % heads == 0, "ShapeMismatch", "model dim not divisible by heads");
  if (mask) {
    require(mask->n == tokens, "ShapeMismatch", "attention mask dim");
    for (int i = 0; i < tokens; ++i)
      require(mask->at(i, i), "AllMaskedRow", "mask diagonal must be true");
  }
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor out(batch * tokens, d);
  // softmax weights kept for backward: [b][h] -> tokens x tokens, row-major
  auto weights = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(batch) * heads * tokens * tokens);

  std::vector<double> logits(static_cast<std::size_t>(tokens));
  for (int b = 0; b < batch; ++b) {
    const int row0 = b * tokens;
    for (int h = 0; h < heads; ++h) {
      const int c0 = h * dh;
      double* w_bh = weights->data() +
                     (static_cast<std::size_t>(b) * heads + h) * tokens * tokens;
      for (int i = 0; i < tokens; ++i) {
        for (int j = 0; j < tokens; ++j) {
          double s = 0.0;
          const double* qi = &tq.at(row0 + i, c0);
          const double* kj = &tk.at(row0 + j, c0);
          for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= inv_sqrt;
          if (mask && !mask->at(i, j)) s += kMaskLogit;
          logits[static_cast<std::size_t>(j)] = s;
        }
        double mx = logits[0];
        for (int j = 1; j < tokens; ++j) mx = std::max(mx, logits[static_cast<std::size_t>(j)]);
        double denom = 0.0;
        for (int j = 0; j < tokens; ++j) {
          const double e = std::exp(logits[static_cast<std::size_t>(j)] - mx);
          w_bh[i * tokens + j] = e;
          denom += e;
        }
        for (int j = 0; j < tokens; ++j) {
          w_bh[i * tokens + j] /= denom;
          // masked pairs must carry exactly zero weight
          assert(!(mask && !mask->at(i, j)) || w_bh[i * tokens + j] == 0.0);
        }
        double* oi = &out.at(row0 + i, c0);
        for (int j = 0; j < tokens; ++j) {
          const double w = w_bh[i * tokens + j];
          if (w == 0.0) continue;
          const double* vj = &tv.at(row0 + j, c0);
          for (int c = 0; c < dh; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }

  return push(std::move(out),
              [q, k, v, weights, batch, tokens, heads, dh, inv_sqrt](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& tq = g.value(q);
    const Tensor& tk = g.value(k);
    const Tensor& tv = g.value(v);
    Tensor& gq = g.grad_acc(q.idx);
    Tensor& gk = g.grad_acc(k.idx);
    Tensor& gv = g.grad_acc(v.idx);
    std::vector<double> dS(static_cast<std::size_t>(tokens) * tokens);
    for (int b = 0; b < batch; ++b) {
      const int row0 = b * tokens;
      for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        const double* w_bh = weights->data() +
                             (static_cast<std::size_t>(b) * heads + h) * tokens * tokens;
        for (int i = 0; i < tokens; ++i) {
          // dA[i][j] = dot(go_i, V_j); dS = softmax backward of dA
          double dot_row = 0.0;
          const double* goi = &go.at(row0 + i, c0);
          for (int j = 0; j < tokens; ++j) {
            double da = 0.0;
            const double* vj = &tv.at(row0 + j, c0);
            for (int c = 0; c < dh; ++c) da += goi[c] * vj[c];
            dS[static_cast<std::size_t>(i) * tokens + j] = da;
            dot_row += da * w_bh[i * tokens + j];
          }
          for (int j = 0; j < tokens; ++j) {
            const double a = w_bh[i * tokens + j];
            dS[static_cast<std::size_t>(i) * tokens + j] =
                a * (dS[static_cast<std::size_t>(i) * tokens + j] - dot_row);
          }
        }
        for (int i = 0; i < tokens; ++i) {
          const double* goi = &go.at(row0 + i, c0);
          double* gqi = &gq.at(row0 + i, c0);
          for (int j = 0; j < tokens; ++j) {
            const double a = w_bh[i * tokens + j];
            const double ds = dS[static_cast<std::size_t>(i) * tokens + j] * inv_sqrt;
            const double* kj = &tk.at(row0 + j, c0);
            const double* qj = &tq.at(row0 + i, c0);
            double* gkj = &gk.at(row0 + j, c0);
            double* gvj = &gv.at(row0 + j, c0);
            for (int c = 0; c < dh; ++c) {
              gvj[c] += a * goi[c];
              gqi[c] += ds * kj[c];
              gkj[c] += ds * qj[c];
            }
          }
        }
      }
    }
  });
}

Var Graph::rows_to_cols(Var a, int batch, int rows_per_sample) {
  const Tensor& ta = value(a);
  require(ta.rows() == batch * rows_per_sample && ta.cols() == 1, "ShapeMismatch",
          "rows_to_cols expects (B*L)x1");
  Tensor out(rows_per_sample, batch);
  for (int b = 0; b < batch; ++b)
    for (int r = 0; r < rows_per_sample; ++r)
      out.at(r, b) = ta.at(b * rows_per_sample + r, 0);
  return push(std::move(out), [a, batch, rows_per_sample](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    for (int b = 0; b < batch; ++b)
      for (int r = 0; r < rows_per_sample; ++r)
        ga.at(b * rows_per_sample + r, 0) += go.at(r, b);
  });
}

Var Graph::cols_to_rows(Var a, int batch, int rows_per_sample) {
  const Tensor& ta = value(a);
  require(ta.rows() == rows_per_sample && ta.cols() == batch, "ShapeMismatch",
          "cols_to_rows expects KxB");
  Tensor out(batch * rows_per_sample, 1);
  for (int b = 0; b < batch; ++b)
    for (int r = 0; r < rows_per_sample; ++r)
      out.at(b * rows_per_sample + r, 0) = ta.at(r, b);
  return push(std::move(out), [a, batch, rows_per_sample](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    Tensor& ga = g.grad_acc(a.idx);
    for (int b = 0; b < batch; ++b)
      for (int r = 0; r < rows_per_sample; ++r)
        ga.at(r, b) += go.at(b * rows_per_sample + r, 0);
  });
}

Var Graph::bound_rescale_cols(Var a) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  auto scales = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), 1.0);
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n), -1);
  Tensor out = ta.clone();
  for (int j = 0; j < n; ++j) {
    double mx = 0.0;
    int arg = 0;
    for (int i = 0; i < m; ++i) {
      const double av = std::fabs(ta.at(i, j));
      if (av > mx) {
        mx = av;
        arg = i;
      }
    }
    if (mx > 1.0) {
      const double s = 1.0 / mx;
      (*scales)[static_cast<std::size_t>(j)] = s;
      (*argmax)[static_cast<std::size_t>(j)] = arg;
      for (int i = 0; i < m; ++i) out.at(i, j) *= s;
    }
  }
  return push(std::move(out), [a, scales, argmax](Graph& g, int self) {
    const Tensor& go = g.out_grad(self);
    const Tensor& ta = g.value(a);
    Tensor& ga = g.grad_acc(a.idx);
    for (int j = 0; j < go.cols(); ++j) {
      const double s = (*scales)[static_cast<std::size_t>(j)];
      const int r = (*argmax)[static_cast<std::size_t>(j)];
      if (r < 0) {
        for (int i = 0; i < go.rows(); ++i) ga.at(i, j) += go.at(i, j);
      } else {
        // y = x / |x_r|: d y_i / d x_l = s delta_il - s^2 sign(x_r) x_i delta_lr
        double acc = 0.0;
        for (int i = 0; i < go.rows(); ++i) {
          ga.at(i, j) += s * go.at(i, j);
          acc += go.at(i, j) * ta.at(i, j);
        }
        const double sgn = ta.at(r, j) >= 0.0 ? 1.0 : -1.0;
        ga.at(r, j) -= s * s * sgn * acc;
      }
    }
  });
}

Var Graph::sum_all(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta.data()[i];
  return push(Tensor::scalar(s), [a](Graph& g, int self) {
    const double go = g.out_grad(self).item();
    Tensor& ga = g.grad_acc(a.idx);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += go;
  });
}

Var Graph::mean_all(Var a) {
  const Tensor& ta = value(a);
  require(ta.size() > 0, "ShapeMismatch", "mean of empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) s += ta.data()[i];
  const double inv = 1.0 / static_cast<double>(ta.size());
  return push(Tensor::scalar(s * inv), [a, inv](Graph& g, int self) {
    const double go = g.out_grad(self).item() * inv;
    Tensor& ga = g.grad_acc(a.idx);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += go;
  });
}

Var Graph::mse(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "ShapeMismatch", "mse");
  require(ta.size() > 0, "ShapeMismatch", "mse of empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const double d = ta.data()[i] - tb.data()[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(ta.size());
  return push(Tensor::scalar(s * inv), [a, b, inv](Graph& g, int self) {
    const double go = g.out_grad(self).item();
    const Tensor& ta = g.value(a);
    const Tensor& tb = g.value(b);
    Tensor& ga = g.grad_acc(a.idx);
    Tensor& gb = g.grad_acc(b.idx);
    for (std::size_t i = 0; i < ta.size(); ++i) {
      const double d = 2.0 * inv * go * (ta.data()[i] - tb.data()[i]);
      ga.data()[i] += d;
      gb.data()[i] -= d;
    }
  });
}

void Graph::backward(Var loss) {
  require(!ran_backward_, "DoubleBackward", "backward already ran on this graph");
  ran_backward_ = true;
  const Tensor& lv = value(loss);
  require(lv.size() == 1, "ShapeMismatch", "backward target must be scalar");
  grad_acc(loss.idx).data()[0] = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = node(i);
    if (n.grad_live && n.back) n.back(*this, i);
  }
}

GradMap Graph::param_grads(const ParameterSet& ps) const {
  GradMap out;
  for (const auto& [name, t] : ps) out.emplace(name, Tensor(t.rows(), t.cols()));
  for (const auto& [name, idx] : bound_params_) {
    auto it = out.find(name);
    if (it == out.end()) continue;  // bound from a different set
    const Node& n = node(idx);
    if (n.grad_live) axpy(it->second, 1.0, n.grad);
  }
  return out;
}

}  // namespace synctl
