#pragma once

// Welch power spectral density and the 8-channel x 12-bin band-power
// feature vector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eegsr/eeg_data.hpp"

namespace eegsr {

struct WelchParams {
  double fs = 512.0;
  std::size_t nperseg = 256;
  std::size_t noverlap = 128;
};

/// Periodic Hann window of length n.
inline std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n));
  return w;
}

/// One-sided Welch density estimate (units^2 / Hz) at the requested DFT bins
/// (all nperseg / 2 + 1 bins when `bins` is empty). Each segment has its mean
/// removed and is Hann-windowed; periodograms are averaged. Bin k sits at
/// k * fs / nperseg Hz; interior bins are doubled, DC and Nyquist are not.
inline std::vector<double> welch_psd(std::span<const double> x, const WelchParams& p = {},
                                     std::vector<std::size_t> bins = {}) {
  const std::size_t n = p.nperseg;
  if (n == 0 || p.noverlap >= n) throw Error("welch: need 0 <= noverlap < nperseg");
  if (x.size() < n) {
    throw Error("welch: signal of " + std::to_string(x.size()) + " samples is shorter than one " +
                std::to_string(n) + "-sample segment");
  }
  if (bins.empty()) {
    bins.resize(n / 2 + 1);
    for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = k;
  }
  for (auto k : bins)
    if (k > n / 2) throw Error("welch: bin " + std::to_string(k) + " exceeds Nyquist");
  const auto w = hann_periodic(n);
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  const std::size_t step = n - p.noverlap;
  const std::size_t segments = (x.size() - n) / step + 1;

  // Precomputed twiddles for the requested bins only.
  std::vector<double> cosines(bins.size() * n), sines(bins.size() * n);
  for (std::size_t b = 0; b < bins.size(); ++b)
    for (std::size_t i = 0; i < n; ++i) {
      double ang = 2.0 * std::numbers::pi * static_cast<double>((bins[b] * i) % n) / static_cast<double>(n);
      cosines[b * n + i] = std::cos(ang);
      sines[b * n + i] = std::sin(ang);
    }

  std::vector<double> psd(bins.size(), 0.0), seg(n);
  for (std::size_t s = 0; s < segments; ++s) {
    const double* src = x.data() + s * step;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) seg[i] = (src[i] - mean) * w[i];
    for (std::size_t b = 0; b < bins.size(); ++b) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        re += seg[i] * cosines[b * n + i];
        im -= seg[i] * sines[b * n + i];
      }
      psd[b] += re * re + im * im;
    }
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bool edge = bins[b] == 0 || (n % 2 == 0 && bins[b] == n / 2);
    psd[b] *= (edge ? 1.0 : 2.0) / (p.fs * w2 * static_cast<double>(segments));
  }
  return psd;
}

/// Channels and frequencies of the feature vector, channel-major.
struct PsdFeatureSpec {
  std::vector<std::string> channels{"C3", "Cz", "C4", "CP1", "CP2", "P3", "Pz", "P4"};
  std::vector<double> freqs_hz{8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
  WelchParams welch{};

  std::size_t dim() const { return channels.size() * freqs_hz.size(); }

  std::vector<std::size_t> bins() const {
    const double df = welch.fs / static_cast<double>(welch.nperseg);
    std::vector<std::size_t> out;
    for (double f : freqs_hz) {
      double k = f / df;
      if (std::abs(k - std::round(k)) > 1e-9) throw Error("feature frequency " + std::to_string(f) + " Hz is not on the DFT grid");
      out.push_back(static_cast<std::size_t>(std::round(k)));
    }
    return out;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& c : channels)
      for (double f : freqs_hz) names.push_back(c + "_" + std::to_string(static_cast<int>(f)) + "Hz");
    return names;
  }
};

/// Row indices of `wanted` inside `labels`.
inline std::vector<std::size_t> channel_rows(const std::vector<std::string>& labels,
                                             const std::vector<std::string>& wanted) {
  std::vector<std::size_t> rows;
  for (const auto& w : wanted) {
    auto it = std::find(labels.begin(), labels.end(), w);
    if (it == labels.end()) throw Error("PSD features need channel '" + w + "', which the montage lacks");
    rows.push_back(static_cast<std::size_t>(it - labels.begin()));
  }
  return rows;
}

/// 96-dim feature of one full-length epoch whose rows are named by
/// `channel_labels`.
inline std::vector<double> psd_features(const Epoch& epoch, const std::vector<std::string>& channel_labels,
                                        const PsdFeatureSpec& spec = {}) {
  if (channel_labels.size() != epoch.channels()) {
    throw ShapeError("psd_features: " + std::to_string(channel_labels.size()) + " labels for " +
                     std::to_string(epoch.channels()) + " channels");
  }
  auto rows = channel_rows(channel_labels, spec.channels);
  auto bins = spec.bins();
  std::vector<double> out;
  out.reserve(spec.dim());
  std::vector<double> row(epoch.samples());
  for (auto r : rows) {
    for (std::size_t t = 0; t < row.size(); ++t) row[t] = epoch.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
    auto p = welch_psd(row, spec.welch, bins);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

/// Features as rows of `X` with one label per row.
struct FeatureSet {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  std::vector<std::string> columns;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
};

/// Pure per epoch; epochs are processed in parallel when OpenMP is enabled.
inline FeatureSet psd_features(const EpochSet& set, const std::vector<std::string>& channel_labels,
                               const PsdFeatureSpec& spec = {}) {
  set.validate();
  if (!set.empty() && channel_labels.size() != set.channels()) {
    throw ShapeError("psd_features: " + std::to_string(channel_labels.size()) + " labels for " +
                     std::to_string(set.channels()) + " channels");
  }
  channel_rows(channel_labels, spec.channels);
  FeatureSet fs_out;
  fs_out.columns = spec.column_names();
  fs_out.X.resize(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!set.epochs[i].label) throw Error("psd_features: epoch " + std::to_string(i) + " has no class label");
    fs_out.labels.push_back(*set.epochs[i].label);
  }
  const auto n = static_cast<std::ptrdiff_t>(set.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto f = psd_features(set.epochs[static_cast<std::size_t>(i)], channel_labels, spec);
    for (std::size_t j = 0; j < f.size(); ++j) fs_out.X(i, static_cast<Eigen::Index>(j)) = f[j];
  }
  return fs_out;
}

inline void write_feature_csv(const FeatureSet& f, const fs::path& path) {
  std::string s;
  for (const auto& c : f.columns) s += c + ',';
  s += "label\n";
  char buf[40];
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (Eigen::Index j = 0; j < f.X.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", f.X(static_cast<Eigen::Index>(i), j));
      s += buf;
    }
    s += std::to_string(f.labels[i]) + '\n';
  }
  io::write_text(path, s);
}

inline FeatureSet read_feature_csv(const fs::path& path) {
  auto text = io::read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty feature file");
  FeatureSet f;
  for (auto c : detail::split_csv_line(line)) f.columns.emplace_back(detail::trim(c));
  if (f.columns.empty() || f.columns.back() != "label") throw ParseError(path.string() + ": last column must be 'label'");
  f.columns.pop_back();
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != f.columns.size() + 1)
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": wrong number of cells");
    std::vector<double> r;
    for (std::size_t j = 0; j < f.columns.size(); ++j) r.push_back(detail::parse_double(cells[j], line_no));
    f.labels.push_back(static_cast<int>(detail::parse_double(cells.back(), line_no)));
    rows.push_back(std::move(r));
  }
  f.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) f.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return f;
}

}  // namespace eegsr
