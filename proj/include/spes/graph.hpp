#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "spes/kernels.hpp"
#include "spes/params.hpp"
#include "spes/rng.hpp"
#include "spes/tensor.hpp"

namespace spes {

// Reverse-mode tape over tensors. Ops evaluate eagerly and record a backward
// closure; reverse creation order is a valid topological order. Gradients are
// only materialised along paths that reach a parameter leaf.
template <typename T>
class Graph {
 public:
  int external_input(const Tensor<T>* v) { return add_node(v, nullptr, -1, false); }

  int input(Tensor<T> v) {
    int id = add_node(nullptr, nullptr, -1, false);
    nodes_[size_t(id)].storage = std::move(v);
    nodes_[size_t(id)].external = nullptr;
    return id;
  }

  int param(ParamStore<T>& store, int index) {
    auto& e = store.entry(index);
    return add_node(&e.value, &e.grad, index, true);
  }

  const Tensor<T>& value(int id) const {
    const Node& n = nodes_[size_t(id)];
    return n.external ? *n.external : n.storage;
  }

  const Tensor<T>& grad(int id) const { return nodes_[size_t(id)].grad; }
  bool wants_grad(int id) const { return nodes_[size_t(id)].requires_grad; }

  // ------------------------------------------------------------------ ops

  int conv1d(int x, int w, int b, int stride, int pad) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(w);
    if (xv.rank() != 2 || wv.rank() != 3 || wv.dim(1) != xv.dim(0))
      throw Error(ErrorKind::shape, "conv1d: bad input/weight shapes");
    kernels::Conv1dDims d;
    d.cin = xv.dim(0);
    d.t_in = xv.dim(1);
    d.cout = wv.dim(0);
    d.k = wv.dim(2);
    d.stride = stride;
    d.pad = pad;
    d.t_out = kernels::conv1d_out_size(d.t_in, d.k, stride, pad);
    if (d.t_out < 1) throw Error(ErrorKind::shape, "conv1d: output length < 1");

    Tensor<T> y({d.cout, d.t_out});
    kernels::conv1d_fwd(xv.data.data(), wv.data.data(),
                        b >= 0 ? value(b).data.data() : nullptr, y.data.data(), d);
    int id = result(std::move(y), needs(x) || needs(w) || (b >= 0 && needs(b)));
    nodes_[size_t(id)].backward = [this, id, x, w, b, d](const Tensor<T>& dy) {
      if (needs(x))
        kernels::conv1d_bwd_input(dy.data.data(), value(w).data.data(),
                                  grad_acc(x).data.data(), d);
      if (needs(w))
        kernels::conv1d_bwd_params(dy.data.data(), value(x).data.data(),
                                   grad_acc(w).data.data(),
                                   b >= 0 && needs(b) ? grad_acc(b).data.data() : nullptr,
                                   d);
    };
    return id;
  }

  int avgpool1d(int x, int k, int stride, int pad) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2) throw Error(ErrorKind::shape, "avgpool1d: rank-2 input expected");
    int c = xv.dim(0), t_in = xv.dim(1);
    int t_out = kernels::conv1d_out_size(t_in, k, stride, pad);
    if (t_out < 1) throw Error(ErrorKind::shape, "avgpool1d: output length < 1");
    Tensor<T> y({c, t_out});
    for (int ci = 0; ci < c; ++ci)
      for (int ot = 0; ot < t_out; ++ot) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
          int it = ot * stride - pad + i;
          if (it >= 0 && it < t_in) acc += double(xv(ci, it));
        }
        y(ci, ot) = T(acc / k);
      }
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, k, stride, pad, c, t_in, t_out](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (int ci = 0; ci < c; ++ci)
        for (int ot = 0; ot < t_out; ++ot) {
          T g = T(double(dy(ci, ot)) / k);
          for (int i = 0; i < k; ++i) {
            int it = ot * stride - pad + i;
            if (it >= 0 && it < t_in) dx(ci, it) += g;
          }
        }
    };
    return id;
  }

  int relu(int x) {
    const Tensor<T>& xv = value(x);
    Tensor<T> y = xv;
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x](const Tensor<T>& dy) {
      if (!needs(x)) return;
      const Tensor<T>& xv = value(x);
      Tensor<T>& dx = grad_acc(x);
      for (size_t i = 0; i < dy.data.size(); ++i)
        if (xv.data[i] > T(0)) dx.data[i] += dy.data[i];
    };
    return id;
  }

  int gelu(int x) {
    const Tensor<T>& xv = value(x);
    Tensor<T> y = xv;
    for (T& v : y.data) {
      double u = double(v);
      v = T(0.5 * u * (1.0 + std::erf(u * M_SQRT1_2)));
    }
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x](const Tensor<T>& dy) {
      if (!needs(x)) return;
      const Tensor<T>& xv = value(x);
      Tensor<T>& dx = grad_acc(x);
      for (size_t i = 0; i < dy.data.size(); ++i) {
        double u = double(xv.data[i]);
        double cdf = 0.5 * (1.0 + std::erf(u * M_SQRT1_2));
        double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
        dx.data[i] += T(double(dy.data[i]) * (cdf + u * pdf));
      }
    };
    return id;
  }

  int add(int a, int b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (!av.same_shape(bv)) throw Error(ErrorKind::shape, "add: shape mismatch");
    Tensor<T> y = av;
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
    int id = result(std::move(y), needs(a) || needs(b));
    nodes_[size_t(id)].backward = [this, a, b](const Tensor<T>& dy) {
      for (int in : {a, b}) {
        if (!needs(in)) continue;
        Tensor<T>& dx = grad_acc(in);
        for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i];
      }
    };
    return id;
  }

  int mul_scalar(int x, double s) {
    Tensor<T> y = value(x);
    for (T& v : y.data) v = T(double(v) * s);
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, s](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += T(double(dy.data[i]) * s);
    };
    return id;
  }

  // y = x W^T + b; x is {din} or {n, din}, W is {dout, din}
  int linear(int x, int w, int b) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(w);
    bool vec = xv.rank() == 1;
    int n = vec ? 1 : xv.dim(0);
    int din = vec ? xv.dim(0) : xv.dim(1);
    if (wv.rank() != 2 || wv.dim(1) != din)
      throw Error(ErrorKind::shape, "linear: weight shape mismatch");
    int dout = wv.dim(0);
    Tensor<T> y(vec ? std::vector<int>{dout} : std::vector<int>{n, dout});
    kernels::matmul_nt(xv.data.data(), wv.data.data(), y.data.data(), n, din, dout);
    if (b >= 0) {
      const Tensor<T>& bv = value(b);
      if (bv.numel() != dout) throw Error(ErrorKind::shape, "linear: bias shape mismatch");
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < dout; ++j) y.data[size_t(i) * dout + j] += bv.data[size_t(j)];
    }
    int id = result(std::move(y), needs(x) || needs(w) || (b >= 0 && needs(b)));
    nodes_[size_t(id)].backward = [this, x, w, b, n, din, dout](const Tensor<T>& dy) {
      if (needs(x))
        kernels::matmul_nn(dy.data.data(), value(w).data.data(), grad_acc(x).data.data(), n,
                           dout, din, /*accumulate=*/true);
      if (needs(w))
        kernels::matmul_tn(dy.data.data(), value(x).data.data(), grad_acc(w).data.data(), n,
                           dout, din, /*accumulate=*/true);
      if (b >= 0 && needs(b)) {
        Tensor<T>& db = grad_acc(b);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < dout; ++j) db.data[size_t(j)] += dy.data[size_t(i) * dout + j];
      }
    };
    return id;
  }

  // C = A B^T; A {m,k}, B {n,k}
  int matmul_nt(int a, int b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
      throw Error(ErrorKind::shape, "matmul_nt: shape mismatch");
    int m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    Tensor<T> y({m, n});
    kernels::matmul_nt(av.data.data(), bv.data.data(), y.data.data(), m, k, n);
    int id = result(std::move(y), needs(a) || needs(b));
    nodes_[size_t(id)].backward = [this, a, b, m, k, n](const Tensor<T>& dy) {
      if (needs(a))
        kernels::matmul_nn(dy.data.data(), value(b).data.data(), grad_acc(a).data.data(), m,
                           n, k, true);
      if (needs(b))
        kernels::matmul_tn(dy.data.data(), value(a).data.data(), grad_acc(b).data.data(), m,
                           n, k, true);
    };
    return id;
  }

  // C = A B; A {m,k}, B {k,n}
  int matmul_nn(int a, int b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
      throw Error(ErrorKind::shape, "matmul_nn: shape mismatch");
    int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<T> y({m, n});
    kernels::matmul_nn(av.data.data(), bv.data.data(), y.data.data(), m, k, n);
    int id = result(std::move(y), needs(a) || needs(b));
    nodes_[size_t(id)].backward = [this, a, b, m, k, n](const Tensor<T>& dy) {
      if (needs(a))
        kernels::matmul_nt(dy.data.data(), value(b).data.data(), grad_acc(a).data.data(), m,
                           n, k, true);
      if (needs(b))
        kernels::matmul_tn(value(a).data.data(), dy.data.data(), grad_acc(b).data.data(), m,
                           k, n, true);
    };
    return id;
  }

  int softmax_rows(int x) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2) throw Error(ErrorKind::shape, "softmax_rows: rank-2 expected");
    int m = xv.dim(0), n = xv.dim(1);
    Tensor<T> y({m, n});
    kernels::softmax_rows(xv.data.data(), y.data.data(), m, n);
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, id, m, n](const Tensor<T>& dy) {
      if (!needs(x)) return;
      kernels::softmax_rows_bwd(value(id).data.data(), dy.data.data(),
                                grad_acc(x).data.data(), m, n);
    };
    return id;
  }

  int layer_norm(int x, int gamma, int beta, double eps = 1e-5) {
    const Tensor<T>& xv = value(x);
    bool vec = xv.rank() == 1;
    int m = vec ? 1 : xv.dim(0);
    int n = vec ? xv.dim(0) : xv.dim(1);
    Tensor<T> y(xv.shape);
    auto mean = std::make_shared<std::vector<double>>(size_t(m));
    auto rstd = std::make_shared<std::vector<double>>(size_t(m));
    kernels::layer_norm_fwd(xv.data.data(), value(gamma).data.data(),
                            value(beta).data.data(), y.data.data(), mean->data(),
                            rstd->data(), m, n, eps);
    int id = result(std::move(y),
                    needs(x) || needs(gamma) || needs(beta));
    nodes_[size_t(id)].backward = [this, x, gamma, beta, m, n, mean, rstd](const Tensor<T>& dy) {
      Tensor<T> dummy;
      bool want_x = needs(x);
      bool want_g = needs(gamma);
      if (!want_x && !want_g && !needs(beta)) return;
      Tensor<T> scratch;
      if (!want_x) {
        scratch = Tensor<T>(value(x).shape);
      }
      kernels::layer_norm_bwd(value(x).data.data(), value(gamma).data.data(), dy.data.data(),
                              mean->data(), rstd->data(),
                              want_x ? grad_acc(x).data.data() : scratch.data.data(),
                              want_g ? grad_acc(gamma).data.data() : nullptr,
                              want_g ? grad_acc(beta).data.data() : nullptr, m, n);
    };
    return id;
  }

  // mean over the time axis: {C, T} -> {C}
  int mean_cols(int x) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2) throw Error(ErrorKind::shape, "mean_cols: rank-2 expected");
    int c = xv.dim(0), t = xv.dim(1);
    Tensor<T> y({c});
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int i = 0; i < t; ++i) acc += double(xv(ci, i));
      y(ci) = T(acc / t);
    }
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, c, t](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (int ci = 0; ci < c; ++ci) {
        T g = T(double(dy(ci)) / t);
        for (int i = 0; i < t; ++i) dx(ci, i) += g;
      }
    };
    return id;
  }

  // stack rank-1 {d} (one row each) or rank-2 {r,d} inputs into {sum_r, d}
  int concat_rows(const std::vector<int>& xs) {
    if (xs.empty()) throw Error(ErrorKind::shape, "concat_rows: no inputs");
    int d = value(xs[0]).rank() == 1 ? value(xs[0]).dim(0) : value(xs[0]).dim(1);
    int rows = 0;
    bool grad = false;
    for (int x : xs) {
      const Tensor<T>& v = value(x);
      int vd = v.rank() == 1 ? v.dim(0) : v.dim(1);
      if (vd != d) throw Error(ErrorKind::shape, "concat_rows: width mismatch");
      rows += v.rank() == 1 ? 1 : v.dim(0);
      grad = grad || needs(x);
    }
    Tensor<T> y({rows, d});
    size_t off = 0;
    for (int x : xs) {
      const Tensor<T>& v = value(x);
      std::copy(v.data.begin(), v.data.end(), y.data.begin() + long(off));
      off += v.data.size();
    }
    int id = result(std::move(y), grad);
    std::vector<int> inputs = xs;
    nodes_[size_t(id)].backward = [this, inputs](const Tensor<T>& dy) {
      size_t off = 0;
      for (int x : inputs) {
        size_t n = value(x).data.size();
        if (needs(x)) {
          Tensor<T>& dx = grad_acc(x);
          for (size_t i = 0; i < n; ++i) dx.data[i] += dy.data[off + i];
        }
        off += n;
      }
    };
    return id;
  }

  // concatenate rank-1 tensors into one rank-1 tensor
  int concat_vec(const std::vector<int>& xs) {
    int total = 0;
    bool grad = false;
    for (int x : xs) {
      total += int(value(x).numel());
      grad = grad || needs(x);
    }
    Tensor<T> y({total});
    size_t off = 0;
    for (int x : xs) {
      const Tensor<T>& v = value(x);
      std::copy(v.data.begin(), v.data.end(), y.data.begin() + long(off));
      off += v.data.size();
    }
    int id = result(std::move(y), grad);
    std::vector<int> inputs = xs;
    nodes_[size_t(id)].backward = [this, inputs](const Tensor<T>& dy) {
      size_t off = 0;
      for (int x : inputs) {
        size_t n = value(x).data.size();
        if (needs(x)) {
          Tensor<T>& dx = grad_acc(x);
          for (size_t i = 0; i < n; ++i) dx.data[i] += dy.data[off + i];
        }
        off += n;
      }
    };
    return id;
  }

  // side-by-side concat of {n, ci} blocks into {n, sum_ci}
  int concat_cols(const std::vector<int>& xs) {
    if (xs.empty()) throw Error(ErrorKind::shape, "concat_cols: no inputs");
    int n = value(xs[0]).dim(0);
    int total = 0;
    bool grad = false;
    for (int x : xs) {
      if (value(x).rank() != 2 || value(x).dim(0) != n)
        throw Error(ErrorKind::shape, "concat_cols: row mismatch");
      total += value(x).dim(1);
      grad = grad || needs(x);
    }
    Tensor<T> y({n, total});
    int coff = 0;
    for (int x : xs) {
      const Tensor<T>& v = value(x);
      int c = v.dim(1);
      for (int i = 0; i < n; ++i)
        std::copy_n(v.data.begin() + size_t(i) * c, c,
                    y.data.begin() + size_t(i) * total + coff);
      coff += c;
    }
    int id = result(std::move(y), grad);
    std::vector<int> inputs = xs;
    nodes_[size_t(id)].backward = [this, inputs, n, total](const Tensor<T>& dy) {
      int coff = 0;
      for (int x : inputs) {
        int c = value(x).dim(1);
        if (needs(x)) {
          Tensor<T>& dx = grad_acc(x);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
              dx.data[size_t(i) * c + j] += dy.data[size_t(i) * total + coff + j];
        }
        coff += c;
      }
    };
    return id;
  }

  int cols(int x, int c0, int c1) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2 || c0 < 0 || c1 > xv.dim(1) || c0 >= c1)
      throw Error(ErrorKind::shape, "cols: bad slice");
    int n = xv.dim(0), d = xv.dim(1), w = c1 - c0;
    Tensor<T> y({n, w});
    for (int i = 0; i < n; ++i)
      std::copy_n(xv.data.begin() + size_t(i) * d + c0, w, y.data.begin() + size_t(i) * w);
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, c0, n, d, w](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) dx.data[size_t(i) * d + c0 + j] += dy.data[size_t(i) * w + j];
    };
    return id;
  }

  int row(int x, int r) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2 || r < 0 || r >= xv.dim(0))
      throw Error(ErrorKind::shape, "row: bad index");
    int d = xv.dim(1);
    Tensor<T> y({d});
    std::copy_n(xv.data.begin() + size_t(r) * d, d, y.data.begin());
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, r, d](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (int j = 0; j < d; ++j) dx.data[size_t(r) * d + j] += dy.data[size_t(j)];
    };
    return id;
  }

  // inverted dropout; call only on training paths
  int dropout(int x, double p, Rng& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw Error(ErrorKind::config, "dropout: p must be < 1");
    const Tensor<T>& xv = value(x);
    auto mask = std::make_shared<std::vector<T>>(xv.data.size());
    double keep = 1.0 - p;
    Tensor<T> y = xv;
    for (size_t i = 0; i < y.data.size(); ++i) {
      T m = rng.uniform01() < keep ? T(1.0 / keep) : T(0);
      (*mask)[i] = m;
      y.data[i] *= m;
    }
    int id = result(std::move(y), needs(x));
    nodes_[size_t(id)].backward = [this, x, mask](const Tensor<T>& dy) {
      if (!needs(x)) return;
      Tensor<T>& dx = grad_acc(x);
      for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i] * (*mask)[i];
    };
    return id;
  }

  // numerically stable weighted binary cross-entropy on a single logit
  int bce_with_logits(int z, double label, double pos_weight) {
    const Tensor<T>& zv = value(z);
    if (zv.numel() != 1) throw Error(ErrorKind::shape, "bce_with_logits: scalar logit expected");
    double zd = double(zv.data[0]);
    auto softplus = [](double v) {
      return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    };
    double loss = pos_weight * label * softplus(-zd) + (1.0 - label) * softplus(zd);
    Tensor<T> y({1});
    y.data[0] = T(loss);
    int id = result(std::move(y), needs(z));
    nodes_[size_t(id)].backward = [this, z, zd, label, pos_weight](const Tensor<T>& dy) {
      if (!needs(z)) return;
      double sig = 1.0 / (1.0 + std::exp(-zd));
      double dz = pos_weight * label * (sig - 1.0) + (1.0 - label) * sig;
      grad_acc(z).data[0] += T(double(dy.data[0]) * dz);
    };
    return id;
  }

  // ------------------------------------------------------------- backward

  void backward(int loss_id) {
    const Tensor<T>& lv = value(loss_id);
    if (lv.numel() != 1) throw Error(ErrorKind::autodiff, "backward: loss must be scalar");
    if (!std::isfinite(double(lv.data[0])))
      throw Error(ErrorKind::autodiff, "backward: non-finite loss");
    if (!nodes_[size_t(loss_id)].requires_grad)
      throw Error(ErrorKind::autodiff, "backward: loss is detached from all parameters");
    grad_acc(loss_id).data[0] = T(1);
    for (int i = loss_id; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (!n.backward || n.grad.data.empty()) continue;
      n.backward(n.grad);
    }
    // push leaf gradients into their parameter sinks
    for (Node& n : nodes_) {
      if (n.grad_sink && !n.grad.data.empty())
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          n.grad_sink->data[i] += n.grad.data[i];
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> storage;
    const Tensor<T>* external = nullptr;
    Tensor<T>* grad_sink = nullptr;  // parameter leaves accumulate here
    Tensor<T> grad;
    std::function<void(const Tensor<T>&)> backward;
    bool requires_grad = false;
    int param_index = -1;
  };

  std::vector<Node> nodes_;

  bool needs(int id) const { return nodes_[size_t(id)].requires_grad; }

  Tensor<T>& grad_acc(int id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.data.empty()) n.grad = Tensor<T>(value(id).shape);
    return n.grad;
  }

  int add_node(const Tensor<T>* external, Tensor<T>* sink, int param_index, bool req) {
    Node n;
    n.external = external;
    n.grad_sink = sink;
    n.param_index = param_index;
    n.requires_grad = req;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  int result(Tensor<T> v, bool req) {
    Node n;
    n.storage = std::move(v);
    n.requires_grad = req;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }
};

// scalar convenience used by tests and the training log
inline double weighted_bce(double logit, double label, double pos_weight) {
  auto softplus = [](double v) {
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  };
  return pos_weight * label * softplus(-logit) + (1.0 - label) * softplus(logit);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace spes
