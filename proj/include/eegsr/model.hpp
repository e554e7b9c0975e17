#pragma once

// Declarative layer list and the parameter container built from it.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eegsr/ops.hpp"

namespace eegsr {

enum class LayerKind { Conv, Dense, UpsampleNN, Concat, Dropout, Activation };
enum class Activation { Linear, ELU, ReLU, Softmax };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::UpsampleNN: return "upsample_nn";
    case LayerKind::Concat: return "concat";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Activation: return "activation";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ELU: return "elu";
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::Conv, LayerKind::Dense, LayerKind::UpsampleNN, LayerKind::Concat,
                 LayerKind::Dropout, LayerKind::Activation})
    if (s == to_string(k)) return k;
  throw ParseError("unknown layer kind '" + s + "'");
}

inline Activation parse_activation(const std::string& s) {
  for (auto a : {Activation::Linear, Activation::ELU, Activation::ReLU, Activation::Softmax})
    if (s == to_string(a)) return a;
  throw ParseError("unknown activation '" + s + "'");
}

/// One entry of a model's layer list. Every layer consumes the output of the
/// layer before it (the model input for layer 0) except Concat, which joins
/// the outputs of `concat_sources` (-1 names the model input).
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t kernels = 0;  // output maps for Conv, units for Dense
  std::array<std::size_t, 2> kernel_dims{1, 1};
  std::array<std::size_t, 2> stride{1, 1};
  Activation activation = Activation::Linear;
  double elu_alpha = 1.0;
  double dropout_rate = 0.0;
  std::size_t factor = 1;  // UpsampleNN
  std::vector<int> concat_sources;

  static LayerSpec conv(std::size_t kernels, std::size_t kh, std::size_t kw, Activation act,
                        std::size_t sh = 1, std::size_t sw = 1) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.kernels = kernels;
    s.kernel_dims = {kh, kw};
    s.stride = {sh, sw};
    s.activation = act;
    return s;
  }
  static LayerSpec dense(std::size_t units, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.kernels = units;
    s.activation = act;
    return s;
  }
  static LayerSpec upsample(std::size_t factor) {
    LayerSpec s;
    s.kind = LayerKind::UpsampleNN;
    s.factor = factor;
    return s;
  }
  static LayerSpec concat(std::vector<int> sources) {
    LayerSpec s;
    s.kind = LayerKind::Concat;
    s.concat_sources = std::move(sources);
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.dropout_rate = rate;
    return s;
  }
  static LayerSpec activation_layer(Activation act) {
    LayerSpec s;
    s.kind = LayerKind::Activation;
    s.activation = act;
    return s;
  }

  bool has_parameters() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
  bool operator==(const LayerSpec&) const = default;
};

template <class T>
Var<T> apply_activation(const Var<T>& x, Activation act, double alpha) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::ELU: return elu(x, static_cast<T>(alpha));
    case Activation::ReLU: return relu(x);
    case Activation::Softmax: return softmax(flatten(x));
  }
  throw Error("unknown activation");
}

/// Parameter container plus the layer list that defines the forward pass.
template <class T>
class Model {
 public:
  Model() = default;

  /// `input_shape` excludes the batch axis: (maps, height, width) or (features).
  Model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed)
      : input_shape_(std::move(input_shape)), layers_(std::move(layers)), seed_(seed) {
    infer_shapes();
    init_parameters();
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// Per-sample output shape of every layer.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }
  std::uint64_t seed() const { return seed_; }

  /// Per-sample shape consumed by layer `i` (the concatenated shape for Concat).
  Shape input_shape_of(std::size_t i) const {
    const auto& l = layers_.at(i);
    if (l.kind == LayerKind::Concat) return shapes_[i];
    return i == 0 ? input_shape_ : shapes_[i - 1];
  }

  /// Copy with independent parameter storage. Plain copies share parameters.
  Model clone() const {
    Model m = *this;
    for (auto& p : m.params_) p = Var<T>(p.value(), true);
    return m;
  }

  /// Replaces parameter values, checking shapes.
  void set_parameter_values(const std::vector<Tensor<T>>& values) {
    if (values.size() != params_.size()) {
      throw ShapeError("expected " + std::to_string(params_.size()) + " parameter tensors, got " +
                       std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      expect_shape(params_[i].shape(), values[i].shape(), "parameter");
      params_[i].mutable_value() = values[i];
    }
  }

  std::vector<Var<T>>& parameters() { return params_; }
  const std::vector<Var<T>>& parameters() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  /// Runs the layer list on a batch x of shape (N, input_shape...). `rng`
  /// drives dropout and is required in training mode.
  Var<T> forward(const Var<T>& x, bool training, std::mt19937_64* rng = nullptr) const {
    Shape expected{x.shape().empty() ? 0 : x.shape()[0]};
    expected.insert(expected.end(), input_shape_.begin(), input_shape_.end());
    expect_shape(expected, x.shape(), "model input");
    std::vector<Var<T>> outs;
    outs.reserve(layers_.size());
    std::size_t p = 0;
    auto source = [&](int idx) -> const Var<T>& { return idx < 0 ? x : outs[static_cast<std::size_t>(idx)]; };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const Var<T>& in = i == 0 ? x : outs.back();
      Var<T> y;
      switch (l.kind) {
        case LayerKind::Conv: {
          y = bias_add(conv2d(in, params_[p], l.stride[0], l.stride[1]), params_[p + 1]);
          y = apply_activation(y, l.activation, l.elu_alpha);
          p += 2;
          break;
        }
        case LayerKind::Dense: {
          y = dense(flatten(in), params_[p], params_[p + 1]);
          y = apply_activation(y, l.activation, l.elu_alpha);
          p += 2;
          break;
        }
        case LayerKind::UpsampleNN: y = upsample_nn(in, l.factor); break;
        case LayerKind::Concat: {
          std::vector<Var<T>> parts;
          for (int s : l.concat_sources) parts.push_back(source(s));
          y = concat(parts);
          break;
        }
        case LayerKind::Dropout: {
          if (!training || l.dropout_rate == 0.0) {
            y = in;
          } else {
            if (!rng) throw Error("dropout in training mode needs an rng");
            y = dropout(in, l.dropout_rate, true, *rng);
          }
          break;
        }
        case LayerKind::Activation: y = apply_activation(in, l.activation, l.elu_alpha); break;
      }
      outs.push_back(std::move(y));
    }
    return outs.empty() ? x : outs.back();
  }

  /// Inference-mode forward on a single detached batch.
  Tensor<T> predict(const Tensor<T>& x) const {
    NoGradGuard guard;
    return forward(constant(x), false).value();
  }

 private:
  void infer_shapes() {
    shapes_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const Shape& in = i == 0 ? input_shape_ : shapes_.back();
      Shape out;
      switch (l.kind) {
        case LayerKind::Conv: {
          if (in.size() != 3) throw ShapeError("conv layer " + std::to_string(i) + " needs (maps, h, w) input, got " + shape_str(in));
          if (l.kernels == 0 || l.kernel_dims[0] == 0 || l.kernel_dims[1] == 0 || l.stride[0] == 0 || l.stride[1] == 0)
            throw ShapeError("conv layer " + std::to_string(i) + ": kernel dims and stride must be positive");
          auto g = ConvGeometry::same(in[1], in[2], l.kernel_dims[0], l.kernel_dims[1], l.stride[0], l.stride[1]);
          out = {l.kernels, g.out_h, g.out_w};
          break;
        }
        case LayerKind::Dense:
          if (l.kernels == 0) throw ShapeError("dense layer " + std::to_string(i) + " needs units > 0");
          out = {l.kernels};
          break;
        case LayerKind::UpsampleNN:
          if (in.size() != 3 || l.factor < 1) throw ShapeError("upsample layer " + std::to_string(i) + ": bad input or factor");
          out = {in[0], in[1] * l.factor, in[2]};
          break;
        case LayerKind::Concat: {
          if (l.concat_sources.empty()) throw ShapeError("concat layer " + std::to_string(i) + " has no sources");
          std::size_t maps = 0;
          Shape ref;
          for (int s : l.concat_sources) {
            if (s >= static_cast<int>(i) || s < -1) throw ShapeError("concat layer " + std::to_string(i) + " references a later layer");
            const Shape& src = s < 0 ? input_shape_ : shapes_[static_cast<std::size_t>(s)];
            Shape spatial(src.begin() + 1, src.end());
            if (ref.empty()) ref = spatial;
            else if (spatial != ref) throw ShapeError("concat layer " + std::to_string(i) + ": mismatched spatial dims");
            maps += src[0];
          }
          out = {maps};
          out.insert(out.end(), ref.begin(), ref.end());
          break;
        }
        case LayerKind::Dropout:
          if (l.dropout_rate < 0.0 || l.dropout_rate >= 1.0) throw ShapeError("dropout rate must lie in [0, 1)");
          out = in;
          break;
        case LayerKind::Activation: out = in; break;
      }
      shapes_.push_back(out);
    }
  }

  void init_parameters() {
    params_.clear();
    std::mt19937_64 rng(seed_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (!l.has_parameters()) continue;
      Shape in = i == 0 ? input_shape_ : shapes_[i - 1];
      Shape w_shape;
      std::size_t fan_in, fan_out;
      if (l.kind == LayerKind::Conv) {
        w_shape = {l.kernels, in[0], l.kernel_dims[0], l.kernel_dims[1]};
        fan_in = in[0] * l.kernel_dims[0] * l.kernel_dims[1];
        fan_out = l.kernels * l.kernel_dims[0] * l.kernel_dims[1];
      } else {
        std::size_t features = shape_numel(in);
        w_shape = {l.kernels, features};
        fan_in = features;
        fan_out = l.kernels;
      }
      bool rectifier = l.activation == Activation::ELU || l.activation == Activation::ReLU;
      double limit = rectifier ? std::sqrt(6.0 / static_cast<double>(fan_in))
                               : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Tensor<T> w(w_shape);
      for (auto& v : w.values()) v = static_cast<T>(dist(rng));
      params_.emplace_back(std::move(w), true);
      params_.emplace_back(Tensor<T>(Shape{l.kernels}), true);
    }
  }

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::uint64_t seed_ = 0;
  std::vector<Shape> shapes_;
  std::vector<Var<T>> params_;
};

/// Closed-form parameter count of a layer list, computed without building
/// tensors.
inline std::size_t count_parameters(const Shape& input_shape, const std::vector<LayerSpec>& layers) {
  std::size_t total = 0;
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const Shape& in = i == 0 ? input_shape : shapes.back();
    Shape out = in;
    switch (l.kind) {
      case LayerKind::Conv:
        total += l.kernels * in[0] * l.kernel_dims[0] * l.kernel_dims[1] + l.kernels;
        out = {l.kernels, (in[1] + l.stride[0] - 1) / l.stride[0], (in[2] + l.stride[1] - 1) / l.stride[1]};
        break;
      case LayerKind::Dense:
        total += l.kernels * shape_numel(in) + l.kernels;
        out = {l.kernels};
        break;
      case LayerKind::UpsampleNN: out = {in[0], in[1] * l.factor, in[2]}; break;
      case LayerKind::Concat: {
        std::size_t maps = 0;
        for (int s : l.concat_sources) maps += (s < 0 ? input_shape : shapes[static_cast<std::size_t>(s)])[0];
        const Shape& first = l.concat_sources[0] < 0 ? input_shape : shapes[static_cast<std::size_t>(l.concat_sources[0])];
        out = first;
        out[0] = maps;
        break;
      }
      default: break;
    }
    shapes.push_back(out);
  }
  return total;
}

}  // namespace eegsr
