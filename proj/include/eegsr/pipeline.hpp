#pragma once

// Stage functions shared by the command-line driver and the acceptance run:
// recordings -> normalized LR/HR segment pairs -> raw full-length epochs and
// PSD features.

#include <string>
#include <vector>

#include "eegsr/baseline.hpp"
#include "eegsr/eeg_data.hpp"
#include "eegsr/psd.hpp"
#include "eegsr/report.hpp"

namespace eegsr {

struct PreprocessConfig {
  std::size_t window = 512;
  std::size_t stride = 32;
  std::size_t seg_len = 64;
  SplitRatios ratios{};
  int scale = 2;

  void validate() const {
    if (scale != 2 && scale != 4) throw ConfigError("scale must be 2 or 4, got " + std::to_string(scale));
    if (window == 0 || stride == 0 || seg_len == 0) throw ConfigError("window, stride and seg_len must be positive");
    if (window % seg_len != 0) throw ConfigError("window must be a multiple of seg_len");
  }
};

/// Normalized LR/HR segment pairs per split. Segments of one epoch are
/// consecutive and in origin order.
struct PreparedData {
  MontageSplit montage;
  NormStats norm;
  std::vector<std::string> channel_labels;
  std::size_t segments_per_epoch = 8;
  EpochSet train_lr, train_hr, val_lr, val_hr, test_lr, test_hr;
  std::vector<std::string> warnings;
};

inline PreparedData preprocess(const std::vector<RawRecording>& recordings, const PreprocessConfig& cfg) {
  cfg.validate();
  if (recordings.empty()) throw MissingInputError("preprocess: no recordings");
  EpochSet all;
  for (const auto& rec : recordings) {
    if (rec.channel_labels != recordings.front().channel_labels)
      throw Error("preprocess: recordings disagree on channel labels");
    auto e = extract_epochs(rec, cfg.window, cfg.stride);
    for (auto& ep : e.epochs) all.epochs.push_back(std::move(ep));
  }
  auto splits = split_dataset(all, cfg.ratios);
  if (splits.train.empty()) throw Error("preprocess: training split is empty");

  PreparedData out;
  out.channel_labels = recordings.front().channel_labels;
  out.montage = make_montage(recordings.front().channels(), cfg.scale);
  out.segments_per_epoch = cfg.window / cfg.seg_len;
  out.warnings = splits.warnings;
  auto cut = [&](const EpochSet& s) { return downsample_channels(segment_epochs(s, cfg.seg_len), out.montage); };
  auto [tl, th] = cut(splits.train);
  auto [vl, vh] = cut(splits.val);
  auto [sl, sh] = cut(splits.test);
  out.norm = compute_norm_stats(tl);
  out.train_lr = apply_norm(tl, out.norm);
  out.train_hr = apply_norm(th, out.norm);
  out.val_lr = apply_norm(vl, out.norm);
  out.val_hr = apply_norm(vh, out.norm);
  out.test_lr = apply_norm(sl, out.norm);
  out.test_hr = apply_norm(sh, out.norm);
  return out;
}

inline const std::vector<std::pair<std::string, EpochSet PreparedData::*>>& prepared_parts() {
  static const std::vector<std::pair<std::string, EpochSet PreparedData::*>> parts{
      {"train_lr", &PreparedData::train_lr}, {"train_hr", &PreparedData::train_hr},
      {"val_lr", &PreparedData::val_lr},     {"val_hr", &PreparedData::val_hr},
      {"test_lr", &PreparedData::test_lr},   {"test_hr", &PreparedData::test_hr}};
  return parts;
}

/// One epoch archive per split and side, plus `preprocess.json` with the
/// montage, normalization and channel labels.
inline void save_prepared(const PreparedData& d, const fs::path& dir) {
  for (const auto& [name, member] : prepared_parts()) save_epoch_set(d.*member, dir / name);
  io::write_json(dir / "preprocess.json",
                 json{{"scale", d.montage.scale},
                      {"total_channels", d.montage.total_channels},
                      {"lr_indices", d.montage.lr_indices},
                      {"hr_indices", d.montage.hr_indices},
                      {"mu", d.norm.mu},
                      {"sigma", d.norm.sigma},
                      {"channel_labels", d.channel_labels},
                      {"segments_per_epoch", d.segments_per_epoch},
                      {"warnings", d.warnings}});
}

inline PreparedData load_prepared(const fs::path& dir) {
  if (!fs::exists(dir / "preprocess.json")) throw MissingInputError("no preprocessed data at " + dir.string());
  auto j = io::read_json(dir / "preprocess.json");
  PreparedData d;
  try {
    d.montage.scale = j.at("scale");
    d.montage.total_channels = j.at("total_channels");
    d.montage.lr_indices = j.at("lr_indices").get<std::vector<std::size_t>>();
    d.montage.hr_indices = j.at("hr_indices").get<std::vector<std::size_t>>();
    d.norm = {j.at("mu"), j.at("sigma")};
    d.channel_labels = j.at("channel_labels").get<std::vector<std::string>>();
    d.segments_per_epoch = j.at("segments_per_epoch");
    d.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError("corrupted " + (dir / "preprocess.json").string() + ": " + e.what());
  }
  for (const auto& [name, member] : prepared_parts()) d.*member = load_epoch_set(dir / name);
  return d;
}

/// Joins normalized LR and HR segments into raw-unit full-length epochs.
inline EpochSet raw_full_epochs(const EpochSet& lr, const EpochSet& hr, const MontageSplit& montage,
                                const NormStats& norm, std::size_t segments_per_epoch) {
  return concatenate_segments(invert_norm(assemble_sr_epochs(lr, hr, montage), norm), segments_per_epoch);
}

inline FeatureSet features_from_segments(const EpochSet& lr, const EpochSet& hr, const MontageSplit& montage,
                                         const NormStats& norm, std::size_t segments_per_epoch,
                                         const std::vector<std::string>& channel_labels) {
  return psd_features(raw_full_epochs(lr, hr, montage, norm, segments_per_epoch), channel_labels);
}

/// HR block of the bicubic reconstruction of each LR segment.
inline EpochSet bicubic_hr(const EpochSet& lr, const MontageSplit& montage) {
  return downsample_channels(bicubic_upsample_channels(lr, montage), montage).second;
}

/// Raw-unit and normalized-unit errors of predicted HR blocks.
inline std::pair<SrError, SrError> hr_errors(const EpochSet& pred_hr, const EpochSet& true_hr, const NormStats& norm) {
  return {sr_metrics(invert_norm(pred_hr, norm), invert_norm(true_hr, norm)), sr_metrics(pred_hr, true_hr)};
}

}  // namespace eegsr
