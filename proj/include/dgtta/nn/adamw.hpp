#pragma once

#include <cmath>
#include <vector>

#include "dgtta/nn/tensor.hpp"

namespace dgtta::nn {

/// Adam with decoupled weight decay: p <- p - lr * wd * p, then the Adam step.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Parameter<T>*> params, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        double w = static_cast<double>(p.value[i]);
        w -= lr_ * wd_ * w;
        m[i] = b1_ * m[i] + (1.0 - b1_) * g;
        v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
        w -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        p.value[i] = static_cast<T>(w);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  const std::vector<Parameter<T>*>& params() const { return params_; }

 private:
  std::vector<Parameter<T>*> params_;
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dgtta::nn
