#pragma once

// Recording ingestion, synthetic recordings, and preprocessing: epoching,
// segmentation, temporal splitting, channel downsampling, normalization.

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eegsr/error.hpp"
#include "eegsr/serialize.hpp"

namespace eegsr {

/// channels x time, row-major.
using Signal = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Standard 10-20 labels of the 32-channel mental-imagery montage, in
/// recording order.
inline const std::vector<std::string>& standard_channel_labels() {
  static const std::vector<std::string> labels{
      "Fp1", "AF3", "F7",  "F3",  "FC1", "FC5", "T7", "C3", "CP1", "CP5", "P7",
      "P3",  "Pz",  "PO3", "O1",  "Oz",  "O2",  "PO4", "P4", "P8",  "CP6", "CP2",
      "C4",  "T8",  "FC6", "FC2", "F4",  "F8",  "AF4", "Fp2", "Fz", "Cz"};
  return labels;
}

struct RawRecording {
  Signal samples;  // microvolts
  int sample_rate = 512;
  std::vector<std::string> channel_labels;
  std::optional<std::vector<int>> labels;  // one class id per sample
  std::string subject_id;

  std::size_t channels() const { return static_cast<std::size_t>(samples.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(samples.cols()); }

  void validate() const {
    if (sample_rate <= 0) throw Error("recording sample rate must be positive");
    if (channel_labels.size() != channels()) {
      throw ShapeError("recording has " + std::to_string(channels()) + " channels but " +
                       std::to_string(channel_labels.size()) + " labels");
    }
    if (labels && labels->size() != length()) {
      throw ShapeError("per-sample label count " + std::to_string(labels->size()) +
                       " differs from recording length " + std::to_string(length()));
    }
  }
};

struct Epoch {
  Signal data;
  std::string subject_id;
  std::optional<int> label;
  std::size_t origin_index = 0;  // first sample in the source recording

  std::size_t channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(data.cols()); }
};

enum class Split { Train, Val, Test, Unsplit };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unsplit: return "unsplit";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  for (auto v : {Split::Train, Split::Val, Split::Test, Split::Unsplit})
    if (s == to_string(v)) return v;
  throw ParseError("unknown split '" + s + "'");
}

struct EpochSet {
  std::vector<Epoch> epochs;
  Split split = Split::Unsplit;

  bool empty() const { return epochs.empty(); }
  std::size_t size() const { return epochs.size(); }
  std::size_t channels() const { return epochs.empty() ? 0 : epochs.front().channels(); }
  std::size_t samples() const { return epochs.empty() ? 0 : epochs.front().samples(); }

  void validate() const {
    for (const auto& e : epochs) {
      if (e.channels() != channels() || e.samples() != samples()) {
        throw ShapeError("epoch set mixes shapes " + std::to_string(channels()) + "x" +
                         std::to_string(samples()) + " and " + std::to_string(e.channels()) + "x" +
                         std::to_string(e.samples()));
      }
    }
  }
};

/// Kept (LR) and removed (HR) channel indices for a scale factor.
struct MontageSplit {
  int scale = 2;
  std::size_t total_channels = 0;
  std::vector<std::size_t> lr_indices;
  std::vector<std::size_t> hr_indices;
};

struct NormStats {
  double mu = 0.0;
  double sigma = 1.0;
};

inline constexpr double kSigmaFloor = 1e-8;

// ---------------------------------------------------------------- CSV input

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view cell, std::size_t line_no) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace detail

enum class RecordingFormat { Csv };

/// Reads a CSV whose header names the channels, optionally followed by a
/// final "label" column with one integer class id per sample.
inline RawRecording load_recording(const fs::path& path, RecordingFormat = RecordingFormat::Csv,
                                   int sample_rate = 512) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open recording " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  auto header = detail::split_csv_line(line);
  std::vector<std::string> names;
  for (auto h : header) names.emplace_back(detail::trim(h));
  bool has_labels = !names.empty() && names.back() == "label";
  if (has_labels) names.pop_back();
  if (names.empty()) throw ParseError(path.string() + ": header names no channels");
  const std::size_t columns = header.size();

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != columns) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(columns) + " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < names.size(); ++c) values.push_back(detail::parse_double(cells[c], line_no));
    if (has_labels) {
      double l = detail::parse_double(cells.back(), line_no);
      if (l != std::floor(l)) throw ParseError("line " + std::to_string(line_no) + ": label is not an integer");
      labels.push_back(static_cast<int>(l));
    }
    ++rows;
  }
  RawRecording rec;
  rec.sample_rate = sample_rate;
  rec.channel_labels = names;
  rec.subject_id = path.stem().string();
  rec.samples.resize(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(rows));
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t c = 0; c < names.size(); ++c)
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = values[t * names.size() + c];
  if (has_labels) rec.labels = std::move(labels);
  rec.validate();
  return rec;
}

inline void save_recording(const RawRecording& rec, const fs::path& path) {
  rec.validate();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t c = 0; c < rec.channels(); ++c) out << (c ? "," : "") << rec.channel_labels[c];
  if (rec.labels) out << ",label";
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < rec.length(); ++t) {
    for (std::size_t c = 0; c < rec.channels(); ++c) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)));
      if (c) out << ',';
      out.write(buf, end - buf);
    }
    if (rec.labels) out << ',' << (*rec.labels)[t];
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

// ----------------------------------------------------------- synthetic data

struct SyntheticConfig {
  std::size_t n_channels = 32;
  std::size_t n_samples = 512 * 20;
  int sample_rate = 512;
  std::size_t n_sources = 4;
  double band_low = 8.0;
  double band_high = 30.0;
  std::uint64_t mixing_seed = 1;
  double noise_sigma = 0.0;      // microvolts
  double source_amplitude = 10.0;  // microvolts
  std::vector<int> class_ids{2, 3, 7};
  std::vector<double> class_band_offsets{0.0, 3.0, 6.0};  // Hz, one per class
  std::size_t class_block_len = 2048;  // samples per contiguous label block

  std::size_t n_classes() const { return class_ids.size(); }

  void validate() const {
    if (n_channels == 0 || n_samples == 0) throw ConfigError("synthetic: channels and samples must be positive");
    if (sample_rate <= 0) throw ConfigError("synthetic: sample_rate must be positive");
    if (n_sources == 0 || n_sources >= n_channels) throw ConfigError("synthetic: need 0 < n_sources < n_channels");
    double nyquist = sample_rate / 2.0;
    if (!(band_low > 0.0 && band_low < band_high && band_high < nyquist))
      throw ConfigError("synthetic: band must lie within (0, sample_rate/2)");
    if (class_ids.empty()) throw ConfigError("synthetic: at least one class id required");
    if (class_band_offsets.size() != class_ids.size())
      throw ConfigError("synthetic: one band offset per class required");
    for (double o : class_band_offsets)
      if (band_low + o <= 0.0 || band_high + o >= nyquist)
        throw ConfigError("synthetic: class band offset moves sources outside (0, sample_rate/2)");
    if (noise_sigma < 0.0) throw ConfigError("synthetic: noise_sigma must be >= 0");
    if (class_block_len == 0) throw ConfigError("synthetic: class_block_len must be positive");
  }
};

/// Channels are a fixed random mixture of band-limited oscillatory sources
/// plus white noise. Every source carries two tones drawn from the band; the
/// active class shifts all tone frequencies by its band offset, with phase
/// kept continuous across class changes. Labels cycle through the classes in
/// blocks of `class_block_len` samples.
inline RawRecording generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto C = static_cast<Eigen::Index>(cfg.n_channels);
  const auto S = static_cast<Eigen::Index>(cfg.n_sources);
  const auto T = static_cast<Eigen::Index>(cfg.n_samples);

  std::mt19937_64 mix_rng(cfg.mixing_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd mixing(C, S);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index k = 0; k < S; ++k) mixing(c, k) = gauss(mix_rng);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(cfg.band_low, cfg.band_high);
  std::uniform_real_distribution<double> phase0(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> weight(0.5, 1.0);
  struct Tone {
    double freq, phase, amplitude;
  };
  std::vector<std::array<Tone, 2>> tones(static_cast<std::size_t>(S));
  for (auto& pair : tones)
    for (auto& tone : pair) tone = {freq(rng), phase0(rng), weight(rng)};

  std::vector<int> labels(cfg.n_samples);
  Eigen::MatrixXd sources(S, T);
  const double dt = 1.0 / cfg.sample_rate;
  for (Eigen::Index t = 0; t < T; ++t) {
    std::size_t cls = (static_cast<std::size_t>(t) / cfg.class_block_len) % cfg.n_classes();
    labels[static_cast<std::size_t>(t)] = cfg.class_ids[cls];
    double offset = cfg.class_band_offsets[cls];
    for (Eigen::Index k = 0; k < S; ++k) {
      double v = 0.0;
      for (auto& tone : tones[static_cast<std::size_t>(k)]) {
        v += tone.amplitude * std::sin(tone.phase);
        tone.phase = std::fmod(tone.phase + 2.0 * std::numbers::pi * (tone.freq + offset) * dt, 2.0 * std::numbers::pi);
      }
      sources(k, t) = cfg.source_amplitude * v;
    }
  }

  RawRecording rec;
  rec.sample_rate = cfg.sample_rate;
  rec.subject_id = "synthetic";
  rec.samples = mixing * sources;
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (Eigen::Index c = 0; c < C; ++c)
      for (Eigen::Index t = 0; t < T; ++t) rec.samples(c, t) += noise(rng);
  }
  if (cfg.n_channels == standard_channel_labels().size()) {
    rec.channel_labels = standard_channel_labels();
  } else {
    for (std::size_t c = 0; c < cfg.n_channels; ++c) rec.channel_labels.push_back("Ch" + std::to_string(c + 1));
  }
  rec.labels = std::move(labels);
  return rec;
}

// --------------------------------------------------------------- epoching

/// Majority label over [start, start + window); ties go to the label at the
/// window center when it is among the tied, else to the smallest tied id.
inline std::optional<int> window_label(const std::optional<std::vector<int>>& labels, std::size_t start,
                                       std::size_t window) {
  if (!labels) return std::nullopt;
  std::map<int, std::size_t> counts;
  for (std::size_t t = start; t < start + window; ++t) ++counts[(*labels)[t]];
  std::size_t best = 0;
  for (const auto& [id, n] : counts) best = std::max(best, n);
  int center = (*labels)[start + window / 2];
  if (counts[center] == best) return center;
  for (const auto& [id, n] : counts)
    if (n == best) return id;
  return std::nullopt;
}

inline EpochSet extract_epochs(const RawRecording& rec, std::size_t window = 512, std::size_t stride = 32) {
  rec.validate();
  if (window == 0 || stride == 0) throw Error("extract_epochs: window and stride must be positive");
  if (rec.length() < window) {
    throw Error("extract_epochs: recording of " + std::to_string(rec.length()) +
                " samples is shorter than the " + std::to_string(window) + "-sample window");
  }
  EpochSet set;
  std::size_t count = (rec.length() - window) / stride + 1;
  set.epochs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t start = i * stride;
    Epoch e;
    e.data = rec.samples.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(window));
    e.subject_id = rec.subject_id;
    e.label = window_label(rec.labels, start, window);
    e.origin_index = start;
    set.epochs.push_back(std::move(e));
  }
  return set;
}

/// Splits every C x T epoch into T / seg_len contiguous C x seg_len pieces.
inline EpochSet segment_epochs(const EpochSet& set, std::size_t seg_len = 64) {
  set.validate();
  if (seg_len == 0 || set.samples() % seg_len != 0) {
    throw Error("segment_epochs: epoch length " + std::to_string(set.samples()) +
                " is not divisible by " + std::to_string(seg_len));
  }
  EpochSet out;
  out.split = set.split;
  for (const auto& e : set.epochs) {
    for (std::size_t s = 0; s < e.samples(); s += seg_len) {
      Epoch piece;
      piece.data = e.data.middleCols(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(seg_len));
      piece.subject_id = e.subject_id;
      piece.label = e.label;
      piece.origin_index = e.origin_index + s;
      out.epochs.push_back(std::move(piece));
    }
  }
  return out;
}

/// Inverse of segment_epochs: joins each run of `per_epoch` consecutive
/// segments back into one epoch.
inline EpochSet concatenate_segments(const EpochSet& set, std::size_t per_epoch) {
  set.validate();
  if (per_epoch == 0 || set.size() % per_epoch != 0) {
    throw Error("concatenate_segments: " + std::to_string(set.size()) + " segments do not group by " +
                std::to_string(per_epoch));
  }
  EpochSet out;
  out.split = set.split;
  const auto seg = static_cast<Eigen::Index>(set.samples());
  for (std::size_t i = 0; i < set.size(); i += per_epoch) {
    Epoch e;
    e.data.resize(static_cast<Eigen::Index>(set.channels()), seg * static_cast<Eigen::Index>(per_epoch));
    for (std::size_t k = 0; k < per_epoch; ++k) {
      const auto& piece = set.epochs[i + k];
      if (piece.origin_index != set.epochs[i].origin_index + k * set.samples())
        throw Error("concatenate_segments: segments are not contiguous in origin order");
      e.data.middleCols(static_cast<Eigen::Index>(k) * seg, seg) = piece.data;
    }
    e.subject_id = set.epochs[i].subject_id;
    e.label = set.epochs[i].label;
    e.origin_index = set.epochs[i].origin_index;
    out.epochs.push_back(std::move(e));
  }
  return out;
}

struct SplitRatios {
  double train = 0.75;
  double val = 0.20;
  double test = 0.05;
};

struct DatasetSplits {
  EpochSet train, val, test;
  std::vector<std::string> warnings;
};

/// Contiguous-in-time split per subject: the first floor(train * n) epochs
/// of each subject go to Train, the next floor(val * n) to Val, the rest to
/// Test. Subject order follows first appearance.
inline DatasetSplits split_dataset(const EpochSet& set, SplitRatios ratios = {}) {
  if (set.empty()) throw Error("split_dataset: empty epoch set");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split_dataset: ratios must be non-negative and sum to 1");
  }
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<const Epoch*>> by_subject;
  for (const auto& e : set.epochs) {
    if (!by_subject.count(e.subject_id)) subjects.push_back(e.subject_id);
    by_subject[e.subject_id].push_back(&e);
  }
  DatasetSplits out;
  out.train.split = Split::Train;
  out.val.split = Split::Val;
  out.test.split = Split::Test;
  for (const auto& s : subjects) {
    const auto& list = by_subject[s];
    const double n = static_cast<double>(list.size());
    auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    auto n_val = static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9));
    for (std::size_t i = 0; i < list.size(); ++i) {
      EpochSet& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
      dst.epochs.push_back(*list[i]);
    }
  }
  for (const EpochSet* part : {&out.train, &out.val, &out.test})
    if (part->empty()) out.warnings.push_back(std::string("split '") + to_string(part->split) + "' is empty");
  return out;
}

// ------------------------------------------------------------------ montage

/// LR channels are the indices divisible by `scale`; the rest are HR.
inline MontageSplit make_montage(std::size_t total_channels, int scale) {
  if (scale < 1 || total_channels == 0 || total_channels % static_cast<std::size_t>(scale) != 0) {
    throw Error("make_montage: " + std::to_string(total_channels) + " channels are not divisible by scale " +
                std::to_string(scale));
  }
  MontageSplit m;
  m.scale = scale;
  m.total_channels = total_channels;
  for (std::size_t c = 0; c < total_channels; ++c)
    (c % static_cast<std::size_t>(scale) == 0 ? m.lr_indices : m.hr_indices).push_back(c);
  return m;
}

inline Signal gather_rows(const Signal& data, const std::vector<std::size_t>& rows) {
  Signal out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline std::pair<Epoch, Epoch> downsample_channels(const Epoch& epoch, const MontageSplit& montage) {
  if (epoch.channels() != montage.total_channels) {
    throw ShapeError("downsample_channels: epoch has " + std::to_string(epoch.channels()) +
                     " channels, montage expects " + std::to_string(montage.total_channels));
  }
  Epoch lr = epoch, hr = epoch;
  lr.data = gather_rows(epoch.data, montage.lr_indices);
  hr.data = gather_rows(epoch.data, montage.hr_indices);
  return {std::move(lr), std::move(hr)};
}

inline std::pair<EpochSet, EpochSet> downsample_channels(const EpochSet& set, const MontageSplit& montage) {
  EpochSet lr, hr;
  lr.split = hr.split = set.split;
  for (const auto& e : set.epochs) {
    auto [l, h] = downsample_channels(e, montage);
    lr.epochs.push_back(std::move(l));
    hr.epochs.push_back(std::move(h));
  }
  return {std::move(lr), std::move(hr)};
}

/// Scatters LR rows to lr_indices and HR rows to hr_indices.
inline Epoch assemble_channels(const Epoch& lr, const Epoch& hr, const MontageSplit& montage) {
  if (lr.channels() != montage.lr_indices.size() || hr.channels() != montage.hr_indices.size() ||
      lr.samples() != hr.samples()) {
    throw ShapeError("assemble: got LR " + std::to_string(lr.channels()) + "x" + std::to_string(lr.samples()) +
                     " and HR " + std::to_string(hr.channels()) + "x" + std::to_string(hr.samples()) +
                     ", montage expects " + std::to_string(montage.lr_indices.size()) + " + " +
                     std::to_string(montage.hr_indices.size()) + " rows");
  }
  Epoch out = lr;
  out.data.resize(static_cast<Eigen::Index>(montage.total_channels), lr.data.cols());
  for (std::size_t i = 0; i < montage.lr_indices.size(); ++i)
    out.data.row(static_cast<Eigen::Index>(montage.lr_indices[i])) = lr.data.row(static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < montage.hr_indices.size(); ++i)
    out.data.row(static_cast<Eigen::Index>(montage.hr_indices[i])) = hr.data.row(static_cast<Eigen::Index>(i));
  return out;
}

// ------------------------------------------------------------ normalization

/// Global mean and population standard deviation over every value of the
/// training LR set, accumulated in a fixed order.
inline NormStats compute_norm_stats(const EpochSet& train_lr) {
  if (train_lr.empty()) throw Error("compute_norm_stats: empty training set");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : train_lr.epochs) {
    sum += e.data.sum();
    n += static_cast<std::size_t>(e.data.size());
  }
  const double mu = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& e : train_lr.epochs) ss += (e.data.array() - mu).square().sum();
  double sigma = std::sqrt(ss / static_cast<double>(n));
  return {mu, std::max(sigma, kSigmaFloor)};
}

inline Epoch apply_norm(const Epoch& epoch, const NormStats& stats) {
  Epoch out = epoch;
  out.data = (epoch.data.array() - stats.mu) / stats.sigma;
  return out;
}

inline Epoch invert_norm(const Epoch& epoch, const NormStats& stats) {
  Epoch out = epoch;
  out.data = epoch.data.array() * stats.sigma + stats.mu;
  return out;
}

inline EpochSet apply_norm(const EpochSet& set, const NormStats& stats) {
  EpochSet out;
  out.split = set.split;
  for (const auto& e : set.epochs) out.epochs.push_back(apply_norm(e, stats));
  return out;
}

inline EpochSet invert_norm(const EpochSet& set, const NormStats& stats) {
  EpochSet out;
  out.split = set.split;
  for (const auto& e : set.epochs) out.epochs.push_back(invert_norm(e, stats));
  return out;
}

// ------------------------------------------------------------ epoch archive

/// Writes `<dir>/manifest.json` and `<dir>/data.f32` (little-endian float32,
/// epoch-major, then channel, then time). `meta` is stored verbatim.
inline void save_epoch_set(const EpochSet& set, const fs::path& dir, const json& meta = json::object()) {
  set.validate();
  fs::create_directories(dir);
  json epochs = json::array();
  std::vector<float> buf;
  buf.reserve(set.size() * set.channels() * set.samples());
  for (const auto& e : set.epochs) {
    json je{{"subject", e.subject_id}, {"origin", e.origin_index}};
    je["label"] = e.label ? json(*e.label) : json(nullptr);
    epochs.push_back(je);
    for (Eigen::Index c = 0; c < e.data.rows(); ++c)
      for (Eigen::Index t = 0; t < e.data.cols(); ++t) buf.push_back(static_cast<float>(e.data(c, t)));
  }
  {
    std::ofstream out(dir / "data.f32", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "data.f32").string());
    io::write_le<float>(out, buf);
  }
  json m{{"format", "eegsr-epochs"}, {"version", 1},           {"split", to_string(set.split)},
         {"count", set.size()},      {"channels", set.channels()}, {"samples", set.samples()},
         {"dtype", "float32"},       {"byte_order", "little"},   {"layout", "epoch,channel,time"},
         {"epochs", epochs},         {"meta", meta}};
  io::write_json(dir / "manifest.json", m);
}

inline EpochSet load_epoch_set(const fs::path& dir, json* meta = nullptr) {
  if (!fs::exists(dir / "manifest.json")) throw MissingInputError("no epoch archive at " + dir.string());
  json m = io::read_json(dir / "manifest.json");
  try {
    if (m.at("format") != "eegsr-epochs" || m.at("version").get<int>() != 1)
      throw ParseError("unsupported epoch archive at " + dir.string());
    auto count = m.at("count").get<std::size_t>();
    auto C = m.at("channels").get<Eigen::Index>();
    auto T = m.at("samples").get<Eigen::Index>();
    const auto& entries = m.at("epochs");
    if (entries.size() != count) throw ParseError("epoch archive count does not match entries");
    std::vector<float> buf(count * static_cast<std::size_t>(C * T));
    std::ifstream in(dir / "data.f32", std::ios::binary);
    if (!in) throw MissingInputError("missing " + (dir / "data.f32").string());
    io::read_le<float>(in, buf);
    EpochSet set;
    set.split = parse_split(m.at("split").get<std::string>());
    std::size_t k = 0;
    for (const auto& je : entries) {
      Epoch e;
      e.data.resize(C, T);
      for (Eigen::Index c = 0; c < C; ++c)
        for (Eigen::Index t = 0; t < T; ++t) e.data(c, t) = buf[k++];
      e.subject_id = je.at("subject").get<std::string>();
      e.origin_index = je.at("origin").get<std::size_t>();
      if (!je.at("label").is_null()) e.label = je.at("label").get<int>();
      set.epochs.push_back(std::move(e));
    }
    if (meta) *meta = m.value("meta", json::object());
    return set;
  } catch (const json::exception& e) {
    throw ParseError("corrupted epoch manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace eegsr
