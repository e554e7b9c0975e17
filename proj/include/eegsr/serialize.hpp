#pragma once

// Parameter serialization: a JSON manifest (layer list, shapes, seed,
// precision) next to a raw little-endian array file holding every parameter
// tensor in declaration order.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "eegsr/error.hpp"
#include "eegsr/model.hpp"

namespace eegsr {

namespace fs = std::filesystem;
using json = nlohmann::json;

template <class T>
constexpr const char* precision_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace io {

template <class T>
void write_le(std::ostream& os, std::span<const T> values) {
  static_assert(std::is_arithmetic_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (T v : values) {
      char buf[sizeof(T)];
      std::memcpy(buf, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
      os.write(buf, sizeof(T));
    }
  }
}

template <class T>
void read_le(std::istream& is, std::span<T> values) {
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!is) throw ParseError("unexpected end of binary array");
  if constexpr (std::endian::native != std::endian::little) {
    for (T& v : values) {
      char buf[sizeof(T)];
      std::memcpy(buf, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
      std::memcpy(&v, buf, sizeof(T));
    }
  }
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline json read_json(const fs::path& path) {
  auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("corrupted manifest " + path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Writes tensors back to back in the storage precision of T.
template <class T>
void save_tensors(const fs::path& path, const std::vector<Tensor<T>>& tensors) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : tensors) write_le<T>(out, t.values());
  if (!out) throw Error("write failed for " + path.string());
}

/// Reads tensors of the given shapes; `stored` names the on-disk precision.
template <class T>
std::vector<Tensor<T>> load_tensors(const fs::path& path, const std::vector<Shape>& shapes,
                                    const std::string& stored) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::vector<Tensor<T>> out;
  for (const auto& s : shapes) {
    Tensor<T> t(s);
    if (stored == "f32") {
      std::vector<float> buf(t.size());
      read_le<float>(in, buf);
      std::copy(buf.begin(), buf.end(), t.data());
    } else if (stored == "f64") {
      std::vector<double> buf(t.size());
      read_le<double>(in, buf);
      std::copy(buf.begin(), buf.end(), t.data());
    } else {
      throw ParseError("unknown stored precision '" + stored + "'");
    }
    out.push_back(std::move(t));
  }
  in.peek();
  if (!in.eof()) throw ParseError("trailing bytes in " + path.string());
  return out;
}

}  // namespace io

inline json layer_to_json(const LayerSpec& l) {
  json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::Conv:
      j["kernels"] = l.kernels;
      j["kernel_dims"] = l.kernel_dims;
      j["stride"] = l.stride;
      j["activation"] = to_string(l.activation);
      j["elu_alpha"] = l.elu_alpha;
      break;
    case LayerKind::Dense:
      j["kernels"] = l.kernels;
      j["activation"] = to_string(l.activation);
      j["elu_alpha"] = l.elu_alpha;
      break;
    case LayerKind::UpsampleNN: j["factor"] = l.factor; break;
    case LayerKind::Concat: j["sources"] = l.concat_sources; break;
    case LayerKind::Dropout: j["rate"] = l.dropout_rate; break;
    case LayerKind::Activation:
      j["activation"] = to_string(l.activation);
      j["elu_alpha"] = l.elu_alpha;
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const json& j) {
  try {
    LayerSpec l;
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    if (j.contains("kernels")) l.kernels = j["kernels"].get<std::size_t>();
    if (j.contains("kernel_dims")) l.kernel_dims = j["kernel_dims"].get<std::array<std::size_t, 2>>();
    if (j.contains("stride")) l.stride = j["stride"].get<std::array<std::size_t, 2>>();
    if (j.contains("activation")) l.activation = parse_activation(j["activation"].get<std::string>());
    if (j.contains("elu_alpha")) l.elu_alpha = j["elu_alpha"].get<double>();
    if (j.contains("factor")) l.factor = j["factor"].get<std::size_t>();
    if (j.contains("sources")) l.concat_sources = j["sources"].get<std::vector<int>>();
    if (j.contains("rate")) l.dropout_rate = j["rate"].get<double>();
    return l;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad layer entry: ") + e.what());
  }
}

template <class T>
json model_manifest(const Model<T>& model) {
  json layers = json::array();
  for (const auto& l : model.layers()) layers.push_back(layer_to_json(l));
  json params = json::array();
  for (const auto& p : model.parameters()) params.push_back(p.shape());
  return json{{"format", "eegsr-model"}, {"version", 1},           {"precision", precision_name<T>()},
              {"byte_order", "little"},  {"seed", model.seed()},   {"input_shape", model.input_shape()},
              {"layers", layers},        {"parameters", params}};
}

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`.
template <class T>
void save_model(const Model<T>& model, const fs::path& dir, const std::string& name) {
  std::vector<Tensor<T>> values;
  for (const auto& p : model.parameters()) values.push_back(p.value());
  io::save_tensors(dir / (name + ".bin"), values);
  io::write_json(dir / (name + ".json"), model_manifest(model));
}

template <class T>
Model<T> load_model(const fs::path& dir, const std::string& name) {
  json m = io::read_json(dir / (name + ".json"));
  try {
    if (m.at("format") != "eegsr-model") throw ParseError("not a model manifest: " + (dir / name).string());
    if (m.at("version").get<int>() != 1) throw ParseError("unsupported model manifest version");
    std::vector<LayerSpec> layers;
    for (const auto& l : m.at("layers")) layers.push_back(layer_from_json(l));
    Model<T> model(m.at("input_shape").get<Shape>(), layers, m.at("seed").get<std::uint64_t>());
    std::vector<Shape> shapes;
    for (const auto& s : m.at("parameters")) shapes.push_back(s.get<Shape>());
    std::vector<Shape> expected;
    for (const auto& p : model.parameters()) expected.push_back(p.shape());
    if (shapes != expected) throw ParseError("parameter shapes in manifest do not match layer list");
    model.set_parameter_values(
        io::load_tensors<T>(dir / (name + ".bin"), shapes, m.at("precision").get<std::string>()));
    return model;
  } catch (const json::exception& e) {
    throw ParseError("corrupted model manifest " + (dir / name).string() + ": " + e.what());
  }
}

}  // namespace eegsr
