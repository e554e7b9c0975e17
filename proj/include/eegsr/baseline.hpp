#pragma once

// Cubic-convolution interpolation of missing channels along the channel
// axis, one time column at a time.

#include <array>
#include <cmath>
#include <string>

#include "eegsr/eeg_data.hpp"

namespace eegsr {

struct CubicKernelParams {
  double a = -0.5;
};

/// Keys cubic convolution kernel; support (-2, 2), h(0) = 1, h(+-1) = h(+-2) = 0.
inline double cubic_weight(double t, double a = -0.5) {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

inline constexpr const char* kBicubicEdgePolicy = "clamp";

/// Per missing channel: the four LR rows it reads (clamped at the ends of the
/// LR row list) and their weights.
struct CubicTap {
  std::array<std::size_t, 4> rows;
  std::array<double, 4> weights;
};

inline CubicTap cubic_tap(std::size_t channel, const MontageSplit& montage, CubicKernelParams p = {}) {
  const auto n_lr = static_cast<long>(montage.lr_indices.size());
  // LR row j sits at channel j * scale; u is the channel in LR-row units.
  const double u = static_cast<double>(channel) / montage.scale;
  const long j0 = static_cast<long>(std::floor(u));
  const double t = u - static_cast<double>(j0);
  CubicTap tap;
  for (int k = 0; k < 4; ++k) {
    long j = std::clamp(j0 - 1 + k, 0L, n_lr - 1);
    tap.rows[static_cast<std::size_t>(k)] = static_cast<std::size_t>(j);
    tap.weights[static_cast<std::size_t>(k)] = cubic_weight(t - static_cast<double>(k - 1), p.a);
  }
  return tap;
}

/// LR rows are copied to their montage positions; every HR channel is the
/// cubic-weighted sum of the four nearest LR rows.
inline Epoch bicubic_upsample_channels(const Epoch& lr, const MontageSplit& montage, CubicKernelParams p = {}) {
  if (montage.lr_indices.size() < 2) throw Error("bicubic interpolation needs at least 2 LR channels");
  if (lr.channels() != montage.lr_indices.size()) {
    throw ShapeError("bicubic: epoch has " + std::to_string(lr.channels()) + " channels, montage keeps " +
                     std::to_string(montage.lr_indices.size()));
  }
  for (std::size_t j = 0; j < montage.lr_indices.size(); ++j)
    if (montage.lr_indices[j] != j * static_cast<std::size_t>(montage.scale))
      throw Error("bicubic: LR channels must sit at multiples of the scale");
  Epoch out = lr;
  out.data.resize(static_cast<Eigen::Index>(montage.total_channels), lr.data.cols());
  for (std::size_t j = 0; j < montage.lr_indices.size(); ++j)
    out.data.row(static_cast<Eigen::Index>(montage.lr_indices[j])) = lr.data.row(static_cast<Eigen::Index>(j));
  for (auto h : montage.hr_indices) {
    auto tap = cubic_tap(h, montage, p);
    auto row = out.data.row(static_cast<Eigen::Index>(h));
    row.setZero();
    for (int k = 0; k < 4; ++k)
      row += tap.weights[static_cast<std::size_t>(k)] * lr.data.row(static_cast<Eigen::Index>(tap.rows[static_cast<std::size_t>(k)]));
  }
  return out;
}

inline EpochSet bicubic_upsample_channels(const EpochSet& lr, const MontageSplit& montage, CubicKernelParams p = {}) {
  EpochSet out;
  out.split = lr.split;
  out.epochs.reserve(lr.size());
  for (const auto& e : lr.epochs) out.epochs.push_back(bicubic_upsample_channels(e, montage, p));
  return out;
}

}  // namespace eegsr
