#pragma once

// Run configuration: `key = value` lines under `[section]` headers. Every key
// has a default; keys outside the schema are rejected.

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eegsr/classifier.hpp"
#include "eegsr/eeg_data.hpp"
#include "eegsr/gan.hpp"
#include "eegsr/pipeline.hpp"
#include "eegsr/sr_models.hpp"

namespace eegsr {

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class Seq>
std::string join_list(const Seq& xs) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ",";
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(x)>>) {
      s += shortest(x);
    } else {
      s += std::to_string(x);
    }
  }
  return s;
}

}  // namespace detail

class RunConfig {
 public:
  RunConfig() {
    SyntheticConfig syn;
    PreprocessConfig pre;
    GeneratorConfig gen;
    DiscriminatorConfig disc;
    TrainConfig tr;
    ClassifierTrainConfig clf;
    using detail::shortest;
    add("run", "seed", "0");
    add("run", "precision", "f32");
    add("run", "scale", std::to_string(pre.scale));

    add("synth", "n_subjects", "2");
    add("synth", "n_channels", std::to_string(syn.n_channels));
    add("synth", "n_samples", std::to_string(syn.n_samples));
    add("synth", "sample_rate", std::to_string(syn.sample_rate));
    add("synth", "n_sources", std::to_string(syn.n_sources));
    add("synth", "band_low", shortest(syn.band_low));
    add("synth", "band_high", shortest(syn.band_high));
    add("synth", "mixing_seed", std::to_string(syn.mixing_seed));
    add("synth", "noise_sigma", shortest(syn.noise_sigma));
    add("synth", "source_amplitude", shortest(syn.source_amplitude));
    add("synth", "class_ids", detail::join_list(syn.class_ids));
    add("synth", "class_band_offsets", detail::join_list(syn.class_band_offsets));
    add("synth", "class_block_len", std::to_string(syn.class_block_len));

    add("preprocess", "window", std::to_string(pre.window));
    add("preprocess", "stride", std::to_string(pre.stride));
    add("preprocess", "seg_len", std::to_string(pre.seg_len));
    add("preprocess", "train_ratio", shortest(pre.ratios.train));
    add("preprocess", "val_ratio", shortest(pre.ratios.val));
    add("preprocess", "test_ratio", shortest(pre.ratios.test));
    add("preprocess", "sample_rate", "512");

    add("model", "width_divisor", std::to_string(gen.width_divisor));
    add("model", "generator_dropout", shortest(gen.dropout));
    add("model", "discriminator_dropout", shortest(disc.dropout));

    add("train", "pretrain_epochs", std::to_string(tr.pretrain_epochs));
    add("train", "gan_epochs", std::to_string(tr.gan_epochs));
    add("train", "batch_size", std::to_string(tr.batch_size));
    add("train", "lr", shortest(tr.adam.lr));
    add("train", "beta1", shortest(tr.adam.beta1));
    add("train", "beta2", shortest(tr.adam.beta2));
    add("train", "eps", shortest(tr.adam.eps));
    add("train", "gp_weight", shortest(tr.gp_weight));
    add("train", "training_ratio", std::to_string(tr.training_ratio));
    add("train", "adv_weight", shortest(tr.adv_weight));
    add("train", "loss_mode", to_string(tr.loss_mode));
    add("train", "real_label", shortest(tr.real_label));
    add("train", "checkpoint_every", std::to_string(tr.checkpoint_every));

    add("classifier", "epochs", std::to_string(clf.epochs));
    add("classifier", "batch_size", std::to_string(clf.batch_size));
    add("classifier", "lr", shortest(clf.adam.lr));
    add("classifier", "beta1", shortest(clf.adam.beta1));
    add("classifier", "beta2", shortest(clf.adam.beta2));
    add("classifier", "eps", shortest(clf.adam.eps));
  }

  /// Applies a file on top of the current values.
  void load_file(const fs::path& path) { load_text(io::read_text(path), path.string()); }

  void load_text(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::string line, section;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      auto where = [&] { return origin + " line " + std::to_string(no); };
      auto t = std::string(detail::trim(line));
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(where() + ": malformed section header");
        section = std::string(detail::trim(std::string_view(t).substr(1, t.size() - 2)));
        if (!sections_.count(section)) throw ConfigError(where() + ": unknown section [" + section + "]");
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(where() + ": expected key = value");
      if (section.empty()) throw ConfigError(where() + ": key outside any section");
      auto key = std::string(detail::trim(std::string_view(t).substr(0, eq)));
      auto value = std::string(detail::trim(std::string_view(t).substr(eq + 1)));
      if (!values_.count(section + "." + key)) throw ConfigError(where() + ": unknown key '" + key + "' in [" + section + "]");
      values_[section + "." + key] = value;
    }
  }

  /// `name` is "section.key".
  void set(const std::string& name, const std::string& value) {
    if (!values_.count(name)) throw ConfigError("unknown config key '" + name + "'");
    values_[name] = value;
  }

  /// Applies "section.key=value".
  void set_assignment(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
    set(std::string(detail::trim(std::string_view(assignment).substr(0, eq))),
        std::string(detail::trim(std::string_view(assignment).substr(eq + 1))));
  }

  const std::string& get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("unknown config key '" + name + "'");
    return it->second;
  }

  double get_double(const std::string& name) const {
    const auto& v = get(name);
    double out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(name + ": '" + v + "' is not a number");
    return out;
  }

  std::uint64_t get_u64(const std::string& name) const {
    const auto& v = get(name);
    std::uint64_t out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
      throw ConfigError(name + ": '" + v + "' is not a non-negative integer");
    return out;
  }

  std::size_t get_size(const std::string& name) const { return static_cast<std::size_t>(get_u64(name)); }

  int get_int(const std::string& name) const {
    const auto& v = get(name);
    int out = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(name + ": '" + v + "' is not an integer");
    return out;
  }

  template <class X>
  std::vector<X> get_list(const std::string& name) const {
    std::vector<X> out;
    for (auto cell : detail::split_csv_line(get(name))) {
      auto c = detail::trim(cell);
      X x{};
      auto r = std::from_chars(c.data(), c.data() + c.size(), x);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size())
        throw ConfigError(name + ": '" + std::string(c) + "' is not a number");
      out.push_back(x);
    }
    return out;
  }

  std::uint64_t seed() const { return get_u64("run.seed"); }
  int scale() const { return get_int("run.scale"); }

  std::string precision() const {
    const auto& p = get("run.precision");
    if (p != "f32" && p != "f64") throw ConfigError("run.precision must be f32 or f64, got '" + p + "'");
    return p;
  }

  SyntheticConfig synthetic() const {
    SyntheticConfig c;
    c.n_channels = get_size("synth.n_channels");
    c.n_samples = get_size("synth.n_samples");
    c.sample_rate = get_int("synth.sample_rate");
    c.n_sources = get_size("synth.n_sources");
    c.band_low = get_double("synth.band_low");
    c.band_high = get_double("synth.band_high");
    c.mixing_seed = get_u64("synth.mixing_seed");
    c.noise_sigma = get_double("synth.noise_sigma");
    c.source_amplitude = get_double("synth.source_amplitude");
    c.class_ids = get_list<int>("synth.class_ids");
    c.class_band_offsets = get_list<double>("synth.class_band_offsets");
    c.class_block_len = get_size("synth.class_block_len");
    c.validate();
    return c;
  }

  std::size_t n_subjects() const {
    auto n = get_size("synth.n_subjects");
    if (n == 0) throw ConfigError("synth.n_subjects must be positive");
    return n;
  }

  PreprocessConfig preprocess() const {
    PreprocessConfig c;
    c.window = get_size("preprocess.window");
    c.stride = get_size("preprocess.stride");
    c.seg_len = get_size("preprocess.seg_len");
    c.ratios = {get_double("preprocess.train_ratio"), get_double("preprocess.val_ratio"),
                get_double("preprocess.test_ratio")};
    c.scale = scale();
    c.validate();
    return c;
  }

  int sample_rate() const {
    int fs = get_int("preprocess.sample_rate");
    if (fs <= 0) throw ConfigError("preprocess.sample_rate must be positive");
    return fs;
  }

  GeneratorConfig generator(std::size_t total_channels) const {
    GeneratorConfig g;
    g.scale = scale();
    if (total_channels % static_cast<std::size_t>(g.scale) != 0)
      throw ConfigError(std::to_string(total_channels) + " channels do not divide by scale " + std::to_string(g.scale));
    g.c_lr = total_channels / static_cast<std::size_t>(g.scale);
    g.seg_len = get_size("preprocess.seg_len");
    g.dropout = get_double("model.generator_dropout");
    g.width_divisor = get_size("model.width_divisor");
    g.validate();
    return g;
  }

  DiscriminatorConfig discriminator(std::size_t total_channels) const {
    auto g = generator(total_channels);
    DiscriminatorConfig d;
    d.c_hr = g.c_hr();
    d.seg_len = g.seg_len;
    d.dropout = get_double("model.discriminator_dropout");
    d.width_divisor = g.width_divisor;
    d.validate();
    return d;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.pretrain_epochs = get_size("train.pretrain_epochs");
    t.gan_epochs = get_size("train.gan_epochs");
    t.batch_size = get_size("train.batch_size");
    t.adam = {get_double("train.lr"), get_double("train.beta1"), get_double("train.beta2"), get_double("train.eps")};
    t.gp_weight = get_double("train.gp_weight");
    t.training_ratio = get_size("train.training_ratio");
    t.adv_weight = get_double("train.adv_weight");
    try {
      t.loss_mode = parse_loss_mode(get("train.loss_mode"));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
    t.real_label = get_double("train.real_label");
    t.checkpoint_every = get_size("train.checkpoint_every");
    t.seed = seed();
    t.validate();
    return t;
  }

  ClassifierTrainConfig classifier() const {
    ClassifierTrainConfig c;
    c.epochs = get_size("classifier.epochs");
    c.batch_size = get_size("classifier.batch_size");
    c.adam = {get_double("classifier.lr"), get_double("classifier.beta1"), get_double("classifier.beta2"),
              get_double("classifier.eps")};
    c.seed = seed();
    c.validate();
    return c;
  }

  /// Parses every typed view once so bad values surface before any work.
  void validate() const {
    precision();
    synthetic();
    n_subjects();
    preprocess();
    sample_rate();
    generator(get_size("synth.n_channels"));
    discriminator(get_size("synth.n_channels"));
    train();
    classifier();
  }

  std::string to_ini() const {
    std::string s;
    for (const auto& sec : order_) {
      s += "[" + sec + "]\n";
      for (const auto& key : sections_.at(sec)) s += key + " = " + values_.at(sec + "." + key) + "\n";
      s += "\n";
    }
    return s;
  }

 private:
  void add(const std::string& section, const std::string& key, std::string value) {
    if (!sections_.count(section)) order_.push_back(section);
    sections_[section].push_back(key);
    values_[section + "." + key] = std::move(value);
  }

  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::string>> sections_;
  std::map<std::string, std::string> values_;
};

}  // namespace eegsr
