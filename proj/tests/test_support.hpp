#pragma once

// Test-only helpers: seeded random tensors and a central finite-difference
// oracle that never touches the autograd machinery.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "eegsr/tensor.hpp"

namespace eegsr::testing {

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

/// Central differences of a scalar function with respect to every element
/// of `inputs[which]`.
inline Tensor<double> finite_difference(const std::function<double(const std::vector<Tensor<double>>&)>& f,
                                        std::vector<Tensor<double>> inputs, std::size_t which,
                                        double h = 1e-5) {
  Tensor<double> out(inputs[which].shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double orig = inputs[which][i];
    inputs[which][i] = orig + h;
    double up = f(inputs);
    inputs[which][i] = orig - h;
    double down = f(inputs);
    inputs[which][i] = orig;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

/// ||a - b|| / max(||a||, ||b||), with a floor for all-zero gradients.
inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-10});
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace eegsr::testing
