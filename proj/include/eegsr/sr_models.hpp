#pragma once

// Generator, discriminator, and PSD classifier layer lists, plus conversion
// between epoch matrices and model batches.

#include <cstdint>
#include <string>
#include <vector>

#include "eegsr/eeg_data.hpp"
#include "eegsr/model.hpp"
#include "eegsr/serialize.hpp"

namespace eegsr {

/// `width_divisor` divides every hidden kernel count (rounded down, at least
/// 1); 1 gives the reference widths. Output layers are never narrowed.
struct GeneratorConfig {
  std::size_t c_lr = 16;
  int scale = 2;
  std::size_t seg_len = 64;
  double dropout = 0.1;
  std::size_t width_divisor = 1;

  std::size_t c_hr() const { return c_lr * static_cast<std::size_t>(scale - 1); }

  void validate() const {
    if (scale != 2 && scale != 4) throw ConfigError("generator scale must be 2 or 4, got " + std::to_string(scale));
    if (c_lr == 0 || seg_len == 0) throw ConfigError("generator needs positive c_lr and seg_len");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("generator dropout must be in [0, 1)");
    if (width_divisor == 0) throw ConfigError("width_divisor must be >= 1");
  }
};

struct DiscriminatorConfig {
  std::size_t c_hr = 16;
  std::size_t seg_len = 64;
  double dropout = 0.25;
  std::size_t width_divisor = 1;

  void validate() const {
    if (c_hr == 0 || seg_len == 0) throw ConfigError("discriminator needs positive c_hr and seg_len");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("discriminator dropout must be in [0, 1)");
    if (width_divisor == 0) throw ConfigError("width_divisor must be >= 1");
  }
};

struct ClassifierConfig {
  std::size_t input_dim = 96;
  std::vector<std::size_t> hidden{512, 256, 128, 64};
  std::size_t n_classes = 3;

  void validate() const {
    if (input_dim == 0 || n_classes < 2) throw ConfigError("classifier needs input_dim > 0 and >= 2 classes");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("classifier hidden sizes must be positive");
  }
};

inline std::size_t narrowed(std::size_t kernels, std::size_t divisor) {
  return std::max<std::size_t>(1, kernels / divisor);
}

/// Input (1, c_lr, seg_len) -> output (1, c_lr * (scale - 1), seg_len).
/// Kernel heights use the model input height C = c_lr throughout.
inline std::vector<LayerSpec> generator_layers(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.c_lr;
  const std::size_t d = cfg.width_divisor;
  std::vector<LayerSpec> L;
  auto add = [&](LayerSpec s) {
    L.push_back(std::move(s));
    return static_cast<int>(L.size()) - 1;
  };
  auto conv_do = [&](std::size_t k, std::size_t kh, std::size_t kw, Activation a) {
    add(LayerSpec::conv(narrowed(k, d), kh, kw, a));
    return add(LayerSpec::dropout(cfg.dropout));
  };
  conv_do(128, C + 1, 1, Activation::Linear);
  int b0 = conv_do(128, C / 2 + 1, 1, Activation::ELU);
  if (cfg.scale == 4) {
    add(LayerSpec::upsample(static_cast<std::size_t>(cfg.scale - 1)));
    b0 = conv_do(128, C + 1, 1, Activation::ELU);
  }
  int s1 = conv_do(128, C / 2 + 1, 1, Activation::ELU);
  add(LayerSpec::concat({b0, s1}));
  int s2 = conv_do(256, C / 2 + 1, 1, Activation::ELU);
  add(LayerSpec::concat({b0, s1, s2}));
  int s3 = conv_do(512, C / 2 + 1, 3, Activation::ELU);
  add(LayerSpec::concat({b0, s1, s2, s3}));
  add(LayerSpec::conv(1, C + 1, 1, Activation::Linear));
  return L;
}

/// Input (1, c_hr, seg_len) -> one unbounded score per sample.
inline std::vector<LayerSpec> discriminator_layers(const DiscriminatorConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.c_hr;
  const std::size_t d = cfg.width_divisor;
  std::vector<LayerSpec> L;
  auto add = [&](LayerSpec s) {
    L.push_back(std::move(s));
    return static_cast<int>(L.size()) - 1;
  };
  add(LayerSpec::conv(narrowed(64, d), C + 1, 1, Activation::Linear));
  int a = add(LayerSpec::dropout(cfg.dropout));
  add(LayerSpec::conv(narrowed(64, d), 1, 3, Activation::ELU));
  int b = add(LayerSpec::dropout(cfg.dropout));
  add(LayerSpec::concat({a, b}));
  add(LayerSpec::conv(narrowed(128, d), C / 2 + 1, 1, Activation::ELU));
  int c = add(LayerSpec::dropout(cfg.dropout));
  add(LayerSpec::concat({a, b, c}));
  add(LayerSpec::conv(narrowed(256, d), C / 4 + 1, 3, Activation::ELU, 4, 4));
  add(LayerSpec::dropout(cfg.dropout));
  add(LayerSpec::dense(narrowed(128, d), Activation::ELU));
  add(LayerSpec::dropout(cfg.dropout));
  add(LayerSpec::dense(1, Activation::Linear));
  return L;
}

inline std::vector<LayerSpec> classifier_layers(const ClassifierConfig& cfg) {
  cfg.validate();
  std::vector<LayerSpec> L;
  for (auto h : cfg.hidden) L.push_back(LayerSpec::dense(h, Activation::ReLU));
  L.push_back(LayerSpec::dense(cfg.n_classes, Activation::Softmax));
  return L;
}

template <class T = float>
Model<T> build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  return Model<T>({1, cfg.c_lr, cfg.seg_len}, generator_layers(cfg), seed);
}

template <class T = float>
Model<T> build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return Model<T>({1, cfg.c_hr, cfg.seg_len}, discriminator_layers(cfg), seed);
}

template <class T = float>
Model<T> build_classifier(const ClassifierConfig& cfg, std::uint64_t seed) {
  return Model<T>({cfg.input_dim}, classifier_layers(cfg), seed);
}

// ------------------------------------------------------ batch conversion

/// Stacks epochs[indices] into a (N, 1, C, T) tensor.
template <class T>
Tensor<T> epochs_to_tensor(const EpochSet& set, const std::vector<std::size_t>& indices) {
  const std::size_t C = set.channels(), Tn = set.samples();
  Tensor<T> out({indices.size(), 1, C, Tn});
  T* dst = out.data();
  for (auto i : indices) {
    const auto& e = set.epochs.at(i);
    if (e.channels() != C || e.samples() != Tn) throw ShapeError("epochs_to_tensor: mixed epoch shapes");
    for (Eigen::Index k = 0; k < e.data.size(); ++k) *dst++ = static_cast<T>(e.data.data()[k]);
  }
  return out;
}

template <class T>
Tensor<T> epochs_to_tensor(const EpochSet& set) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return epochs_to_tensor<T>(set, all);
}

/// Row `n` of a (N, 1, C, T) tensor as a C x T matrix.
template <class T>
Signal tensor_sample(const Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 1) throw ShapeError("expected (N, 1, C, T), got " + shape_str(t.shape()));
  const auto C = static_cast<Eigen::Index>(t.dim(2)), Tn = static_cast<Eigen::Index>(t.dim(3));
  Signal s(C, Tn);
  const T* src = t.data() + n * t.stride0();
  for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = static_cast<double>(src[k]);
  return s;
}

/// Inference-mode generator pass on one normalized c_lr x seg_len epoch.
template <class T>
Epoch generator_forward(const Model<T>& generator, const Epoch& lr) {
  const Shape& in = generator.input_shape();
  if (lr.channels() != in[1] || lr.samples() != in[2]) {
    throw ShapeError("generator expects " + std::to_string(in[1]) + "x" + std::to_string(in[2]) + " input, got " +
                     std::to_string(lr.channels()) + "x" + std::to_string(lr.samples()));
  }
  EpochSet one;
  one.epochs.push_back(lr);
  Epoch out = lr;
  out.data = tensor_sample(generator.predict(epochs_to_tensor<T>(one)), 0);
  return out;
}

/// Inference-mode generator pass over a whole set, in batches.
template <class T>
EpochSet generator_predict(const Model<T>& generator, const EpochSet& lr, std::size_t batch = 64) {
  EpochSet out;
  out.split = lr.split;
  if (lr.empty()) return out;
  const Shape& in = generator.input_shape();
  if (lr.channels() != in[1] || lr.samples() != in[2]) {
    throw ShapeError("generator expects " + std::to_string(in[1]) + "x" + std::to_string(in[2]) + " input, got " +
                     std::to_string(lr.channels()) + "x" + std::to_string(lr.samples()));
  }
  for (std::size_t start = 0; start < lr.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(lr.size(), start + batch); ++i) idx.push_back(i);
    auto y = generator.predict(epochs_to_tensor<T>(lr, idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Epoch e = lr.epochs[idx[k]];
      e.data = tensor_sample(y, k);
      out.epochs.push_back(std::move(e));
    }
  }
  return out;
}

inline Epoch assemble_sr_epoch(const Epoch& lr, const Epoch& hr_pred, const MontageSplit& montage) {
  return assemble_channels(lr, hr_pred, montage);
}

inline EpochSet assemble_sr_epochs(const EpochSet& lr, const EpochSet& hr_pred, const MontageSplit& montage) {
  if (lr.size() != hr_pred.size()) throw ShapeError("assemble: LR and HR sets differ in size");
  EpochSet out;
  out.split = lr.split;
  for (std::size_t i = 0; i < lr.size(); ++i) out.epochs.push_back(assemble_sr_epoch(lr.epochs[i], hr_pred.epochs[i], montage));
  return out;
}

}  // namespace eegsr
