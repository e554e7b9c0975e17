#pragma once

// Super-resolution error metrics, classification metrics, and their CSV and
// markdown renderings.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eegsr/eeg_data.hpp"
#include "eegsr/serialize.hpp"

namespace eegsr {

struct SrError {
  double mse = 0.0;
  double mae = 0.0;
};

/// Mean squared and mean absolute error over every value of every epoch.
/// Sets must be aligned epoch by epoch.
inline SrError sr_metrics(const EpochSet& pred, const EpochSet& truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("sr_metrics: " + std::to_string(pred.size()) + " predicted epochs vs " +
                     std::to_string(truth.size()) + " true epochs");
  }
  if (pred.size() == 0) throw Error("sr_metrics: empty epoch sets");
  long double se = 0.0L, ae = 0.0L;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& p = pred.epochs[i].data;
    const auto& t = truth.epochs[i].data;
    if (p.rows() != t.rows() || p.cols() != t.cols()) throw ShapeError("sr_metrics: epoch " + std::to_string(i) + " shape mismatch");
    if (pred.epochs[i].origin_index != truth.epochs[i].origin_index)
      throw ShapeError("sr_metrics: epoch " + std::to_string(i) + " comes from different source windows");
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      long double d = static_cast<long double>(p.data()[k]) - t.data()[k];
      se += d * d;
      ae += std::abs(d);
    }
    count += static_cast<std::size_t>(p.size());
  }
  return {static_cast<double>(se / count), static_cast<double>(ae / count)};
}

enum class EvalDataset { Val, Test };
enum class SrMethod { Bicubic, WGAN };

inline const char* to_string(EvalDataset d) { return d == EvalDataset::Val ? "Val" : "Test"; }
inline const char* to_string(SrMethod m) { return m == SrMethod::Bicubic ? "Bicubic" : "WGAN"; }

inline EvalDataset parse_eval_dataset(const std::string& s) {
  if (s == "Val") return EvalDataset::Val;
  if (s == "Test") return EvalDataset::Test;
  throw ParseError("unknown dataset '" + s + "'");
}

inline SrMethod parse_sr_method(const std::string& s) {
  if (s == "Bicubic") return SrMethod::Bicubic;
  if (s == "WGAN") return SrMethod::WGAN;
  throw ParseError("unknown method '" + s + "'");
}

/// One Table-3 cell pair. mse and mae are in raw signal units; the
/// normalized pair is measured in training-normalized units.
struct MetricsRecord {
  EvalDataset dataset = EvalDataset::Test;
  int scale = 2;
  SrMethod method = SrMethod::Bicubic;
  double mse = 0.0, mae = 0.0;
  double normalized_mse = 0.0, normalized_mae = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  static MetricsRecord make(EvalDataset d, int scale, SrMethod m, SrError raw, SrError normalized,
                            std::uint64_t seed, std::string hash) {
    MetricsRecord r{d, scale, m, raw.mse, raw.mae, normalized.mse, normalized.mae, seed, std::move(hash)};
    r.validate();
    return r;
  }

  void validate() const {
    if (scale != 2 && scale != 4) throw ConfigError("metrics record: scale must be 2 or 4");
    auto check = [](double mse, double mae, const char* what) {
      if (!(mse >= 0.0) || !(mae >= 0.0)) throw NumericError(std::string(what) + ": negative or NaN error");
      // mae <= sqrt(mse), up to rounding of the two accumulations
      if (mae > std::sqrt(mse) * (1.0 + 1e-12) + 1e-300)
        throw NumericError(std::string(what) + ": mae exceeds sqrt(mse)");
    };
    check(mse, mae, "raw metrics");
    check(normalized_mse, normalized_mae, "normalized metrics");
  }

  bool operator==(const MetricsRecord&) const = default;
};

enum class ClassSource { HR, WGAN };

inline const char* to_string(ClassSource s) { return s == ClassSource::HR ? "HR" : "WGAN"; }

inline ClassSource parse_class_source(const std::string& s) {
  if (s == "HR") return ClassSource::HR;
  if (s == "WGAN") return ClassSource::WGAN;
  throw ParseError("unknown feature source '" + s + "'");
}

/// Percentages in [0, 100]. A flag marks a precision or recall whose
/// denominator was zero; its value is 0.
struct ClassMetrics {
  int scale = 2;
  ClassSource source = ClassSource::HR;
  std::vector<int> classes;
  double accuracy = 0.0;
  std::vector<double> precision, recall;
  std::vector<bool> precision_undefined, recall_undefined;
  std::vector<std::size_t> true_positives, support;

  /// sum(TP) / sum(TP + FN), which equals accuracy.
  double micro_recall() const {
    std::size_t tp = 0, n = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) tp += true_positives[c], n += support[c];
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(n);
  }

  bool operator==(const ClassMetrics&) const = default;
};

inline ClassMetrics classification_metrics(const std::vector<int>& preds, const std::vector<int>& truth,
                                           const std::vector<int>& classes = {2, 3, 7}, int scale = 2,
                                           ClassSource source = ClassSource::HR) {
  if (preds.size() != truth.size()) {
    throw ShapeError("classification_metrics: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error("classification_metrics: no samples");
  const std::size_t k = classes.size();
  auto pos = [&](int id) {
    auto it = std::find(classes.begin(), classes.end(), id);
    if (it == classes.end()) throw Error("classification_metrics: unknown class id " + std::to_string(id));
    return static_cast<std::size_t>(it - classes.begin());
  };
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto t = pos(truth[i]), p = pos(preds[i]);
    if (t == p) {
      ++tp[t];
      ++correct;
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  ClassMetrics m;
  m.scale = scale;
  m.source = source;
  m.classes = classes;
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  m.true_positives = tp;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pd = tp[c] + fp[c], rd = tp[c] + fn[c];
    m.precision.push_back(pd ? 100.0 * static_cast<double>(tp[c]) / static_cast<double>(pd) : 0.0);
    m.recall.push_back(rd ? 100.0 * static_cast<double>(tp[c]) / static_cast<double>(rd) : 0.0);
    m.precision_undefined.push_back(pd == 0);
    m.recall_undefined.push_back(rd == 0);
    m.support.push_back(rd);
  }
  return m;
}

/// Run-level facts written as a `#` comment line ahead of CSV data.
struct ReportMeta {
  std::string edge_policy = "clamp";
  std::string psd_estimator = "welch(hann,256,overlap=128)";
  std::vector<std::pair<std::string, std::string>> extra;

  std::string line() const {
    std::string s = "# edge_policy=" + edge_policy + ";psd_estimator=" + psd_estimator;
    for (const auto& [k, v] : extra) s += ";" + k + "=" + v;
    return s + "\n";
  }
};

namespace detail {

inline std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3E", v);
  return buf;
}

inline std::string pct(double v, bool flagged) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return std::string(buf) + (flagged ? "*" : "");
}

/// Non-comment, non-blank lines after the header, with 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> data_lines(const std::string& text, const std::string& header,
                                                                   const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  bool seen_header = false;
  std::vector<std::pair<std::size_t, std::string>> out;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) throw ParseError(what + ": unexpected header '" + line + "'");
      seen_header = true;
      continue;
    }
    out.emplace_back(no, line);
  }
  if (!seen_header) throw ParseError(what + ": missing header");
  return out;
}

}  // namespace detail

inline constexpr const char* kMetricsCsvHeader = "dataset,scale,method,mse,mae,normalized_mse,normalized_mae,seed,config_hash";
inline constexpr const char* kClassCsvHeader = "scale,source,class,metric,value,undefined,count";

inline std::string metrics_csv(const std::vector<MetricsRecord>& records, const ReportMeta& meta = {}) {
  if (records.empty()) throw Error("report: no metrics records");
  std::string s = meta.line() + kMetricsCsvHeader + "\n";
  for (const auto& r : records) {
    r.validate();
    s += std::string(to_string(r.dataset)) + "," + std::to_string(r.scale) + "," + to_string(r.method) + "," +
         detail::full(r.mse) + "," + detail::full(r.mae) + "," + detail::full(r.normalized_mse) + "," +
         detail::full(r.normalized_mae) + "," + std::to_string(r.seed) + "," + r.config_hash + "\n";
  }
  return s;
}

inline std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRecord> out;
  for (const auto& [no, line] : detail::data_lines(text, kMetricsCsvHeader, "metrics csv")) {
    auto c = detail::split_csv_line(line);
    if (c.size() != 9) throw ParseError("metrics csv line " + std::to_string(no) + ": expected 9 cells");
    MetricsRecord r;
    r.dataset = parse_eval_dataset(std::string(c[0]));
    r.scale = static_cast<int>(detail::parse_double(c[1], no));
    r.method = parse_sr_method(std::string(c[2]));
    r.mse = detail::parse_double(c[3], no);
    r.mae = detail::parse_double(c[4], no);
    r.normalized_mse = detail::parse_double(c[5], no);
    r.normalized_mae = detail::parse_double(c[6], no);
    r.seed = std::stoull(std::string(c[7]));
    r.config_hash = std::string(c[8]);
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

/// Long format: one row per (scale, source, class, metric). Accuracy rows use
/// class "all".
inline std::string class_metrics_csv(const std::vector<ClassMetrics>& ms, const ReportMeta& meta = {}) {
  if (ms.empty()) throw Error("report: no classification metrics");
  std::string s = meta.line() + kClassCsvHeader + "\n";
  for (const auto& m : ms) {
    std::string head = std::to_string(m.scale) + "," + to_string(m.source) + ",";
    std::size_t n = 0;
    for (auto v : m.support) n += v;
    s += head + "all,accuracy," + detail::full(m.accuracy) + ",0," + std::to_string(n) + "\n";
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
      auto cls = std::to_string(m.classes[c]);
      s += head + cls + ",precision," + detail::full(m.precision[c]) + "," + (m.precision_undefined[c] ? "1" : "0") +
           "," + std::to_string(m.true_positives[c]) + "\n";
      s += head + cls + ",recall," + detail::full(m.recall[c]) + "," + (m.recall_undefined[c] ? "1" : "0") + "," +
           std::to_string(m.support[c]) + "\n";
    }
  }
  return s;
}

inline std::vector<ClassMetrics> parse_class_metrics_csv(const std::string& text) {
  std::vector<ClassMetrics> out;
  for (const auto& [no, line] : detail::data_lines(text, kClassCsvHeader, "class metrics csv")) {
    auto c = detail::split_csv_line(line);
    if (c.size() != 7) throw ParseError("class metrics csv line " + std::to_string(no) + ": expected 7 cells");
    int scale = static_cast<int>(detail::parse_double(c[0], no));
    auto source = parse_class_source(std::string(c[1]));
    std::string metric(c[3]);
    double value = detail::parse_double(c[4], no);
    bool undefined = c[5] == "1";
    auto count = static_cast<std::size_t>(detail::parse_double(c[6], no));
    if (metric == "accuracy") {
      ClassMetrics m;
      m.scale = scale;
      m.source = source;
      m.accuracy = value;
      out.push_back(std::move(m));
      continue;
    }
    if (out.empty() || out.back().scale != scale || out.back().source != source)
      throw ParseError("class metrics csv line " + std::to_string(no) + ": per-class row before its accuracy row");
    auto& m = out.back();
    int cls = static_cast<int>(detail::parse_double(c[2], no));
    if (metric == "precision") {
      m.classes.push_back(cls);
      m.precision.push_back(value);
      m.precision_undefined.push_back(undefined);
      m.true_positives.push_back(count);
    } else if (metric == "recall") {
      if (m.classes.empty() || m.classes.back() != cls)
        throw ParseError("class metrics csv line " + std::to_string(no) + ": recall row without precision row");
      m.recall.push_back(value);
      m.recall_undefined.push_back(undefined);
      m.support.push_back(count);
    } else {
      throw ParseError("class metrics csv line " + std::to_string(no) + ": unknown metric '" + metric + "'");
    }
  }
  return out;
}

/// Rows Val/Test x scale, columns Bicubic/WGAN x MSE/MAE. Missing cells print
/// as "-".
inline std::string sr_markdown_table(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw Error("report: no metrics records");
  std::set<int> scales;
  for (const auto& r : records) scales.insert(r.scale);
  auto find = [&](EvalDataset d, int s, SrMethod m) -> const MetricsRecord* {
    for (const auto& r : records)
      if (r.dataset == d && r.scale == s && r.method == m) return &r;
    return nullptr;
  };
  std::string s = "| Dataset | Scale | Bicubic MSE | Bicubic MAE | WGAN MSE | WGAN MAE |\n";
  s += "|---|---|---|---|---|---|\n";
  for (auto d : {EvalDataset::Val, EvalDataset::Test})
    for (int sc : scales) {
      s += std::string("| ") + to_string(d) + " | " + std::to_string(sc);
      for (auto m : {SrMethod::Bicubic, SrMethod::WGAN}) {
        const auto* r = find(d, sc, m);
        s += r ? " | " + detail::sci(r->mse) + " | " + detail::sci(r->mae) : std::string(" | - | -");
      }
      s += " |\n";
    }
  return s;
}

/// Rows scale x metric x class, columns HR/WGAN. Flagged zero-denominator
/// values carry a trailing '*'.
inline std::string class_markdown_table(const std::vector<ClassMetrics>& ms) {
  if (ms.empty()) throw Error("report: no classification metrics");
  std::map<int, std::map<ClassSource, const ClassMetrics*>> by_scale;
  for (const auto& m : ms) by_scale[m.scale][m.source] = &m;
  std::string s = "| Scale | Metric | Class | HR | WGAN |\n|---|---|---|---|---|\n";
  for (const auto& [scale, by_src] : by_scale) {
    const ClassMetrics* any = by_src.begin()->second;
    auto cell = [&](ClassSource src, auto&& get) {
      auto it = by_src.find(src);
      return it == by_src.end() ? std::string("-") : get(*it->second);
    };
    auto row = [&](const std::string& metric, const std::string& cls, auto&& get) {
      s += "| " + std::to_string(scale) + " | " + metric + " | " + cls + " | " + cell(ClassSource::HR, get) + " | " +
           cell(ClassSource::WGAN, get) + " |\n";
    };
    row("Accuracy", "all", [](const ClassMetrics& m) { return detail::pct(m.accuracy, false); });
    for (const char* metric : {"Precision", "Recall"})
      for (std::size_t c = 0; c < any->classes.size(); ++c) {
        bool prec = std::string(metric) == "Precision";
        int cls = any->classes[c];
        row(metric, std::to_string(cls), [&](const ClassMetrics& m) {
          auto it = std::find(m.classes.begin(), m.classes.end(), cls);
          if (it == m.classes.end()) return std::string("-");
          auto i = static_cast<std::size_t>(it - m.classes.begin());
          return prec ? detail::pct(m.precision[i], m.precision_undefined[i])
                      : detail::pct(m.recall[i], m.recall_undefined[i]);
        });
      }
  }
  return s;
}

enum class ReportFormat { Csv, Markdown };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  throw ConfigError("unknown report format '" + s + "' (expected csv or markdown)");
}

/// Markdown document with whichever tables have records.
inline std::string markdown_report(const std::vector<MetricsRecord>& sr, const std::vector<ClassMetrics>& cls,
                                   const ReportMeta& meta = {}) {
  if (sr.empty() && cls.empty()) throw Error("report: no records");
  std::string s = "# EEG super-resolution report\n\n";
  if (!sr.empty()) s += "## Super-resolution error (raw units)\n\n" + sr_markdown_table(sr) + "\n";
  if (!cls.empty()) {
    s += "## Classification on PSD features (%)\n\n" + class_markdown_table(cls) + "\n";
    s += "`*` marks a zero denominator reported as 0.\n\n";
  }
  s += "Bicubic edge policy: " + meta.edge_policy + ". PSD estimator: " + meta.psd_estimator + ".\n";
  return s;
}

/// Writes SR metrics in the requested format. Markdown output also includes
/// the classification table when `cls` is non-empty.
inline void emit_report(const std::vector<MetricsRecord>& sr, const std::vector<ClassMetrics>& cls, ReportFormat format,
                        const fs::path& path, const ReportMeta& meta = {}) {
  if (format == ReportFormat::Csv) {
    io::write_text(path, metrics_csv(sr, meta));
  } else {
    io::write_text(path, markdown_report(sr, cls, meta));
  }
}

}  // namespace eegsr
