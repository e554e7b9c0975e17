#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "eegsr/autograd.hpp"

namespace eegsr {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, const std::vector<Var<T>>& params) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  void step(std::vector<Var<T>>& params, const std::vector<Var<T>>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameters");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
    const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
    for (std::size_t k = 0; k < params.size(); ++k) {
      expect_shape(params[k].shape(), grads[k].shape(), "adam gradient");
      T* p = params[k].mutable_value().data();
      const T* g = grads[k].value().data();
      T* m = m_[k].data();
      T* v = v_[k].data();
      for (std::size_t i = 0, n = params[k].size(); i < n; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        T mhat = m[i] * ic1;
        T vhat = v[i] * ic2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace eegsr
