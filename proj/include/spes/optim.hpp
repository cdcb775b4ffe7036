#pragma once

#include <cmath>
#include <vector>

#include "spes/error.hpp"

namespace spes {

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameters and never enters the moment estimates.
template <typename T>
class AdamW {
 public:
  AdamW(size_t n_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8, double weight_decay = 0.01)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay),
        m_(n_params, 0.0), v_(n_params, 0.0) {}

  void step(std::vector<T>& params, const std::vector<T>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw Error(ErrorKind::shape, "adamw: parameter/gradient size mismatch");
    for (const T& gt : grads)
      if (!std::isfinite(double(gt)))
        throw Error(ErrorKind::autodiff, "adamw: non-finite gradient, step rejected");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, double(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, double(step_count_));
    for (size_t i = 0; i < params.size(); ++i) {
      double g = double(grads[i]);
      double p = double(params[i]);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double m_hat = m_[i] / bc1;
      double v_hat = v_[i] / bc2;
      p -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      p -= lr_ * weight_decay_ * double(params[i]);
      params[i] = T(p);
    }
  }

  long step_count() const { return step_count_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  std::vector<double>& moment1() { return m_; }
  std::vector<double>& moment2() { return v_; }
  const std::vector<double>& moment1() const { return m_; }
  const std::vector<double>& moment2() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, long steps) {
    if (m.size() != m_.size() || v.size() != v_.size())
      throw Error(ErrorKind::shape, "adamw: restored state size mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    step_count_ = steps;
  }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::vector<double> m_, v_;
  long step_count_ = 0;
};

}  // namespace spes
