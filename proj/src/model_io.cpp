// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/model_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

namespace mofhei {

namespace {

using nlohmann::json;

constexpr const char* kTensorNames[] = {"weights", "bias", "coeffs", "gamma", "beta", "moving_mean", "moving_var"};

Tensor* tensor_by_name(LayerSpec& l, const std::string& name) {
  if (name == "weights") return &l.weights;
  if (name == "bias") return &l.bias;
  if (name == "coeffs") return &l.coeffs;
  if (name == "gamma") return &l.gamma;
  if (name == "beta") return &l.beta;
  if (name == "moving_mean") return &l.moving_mean;
  if (name == "moving_var") return &l.moving_var;
  return nullptr;
}

const Tensor& tensor_by_name(const LayerSpec& l, const std::string& name) {
  return *tensor_by_name(const_cast<LayerSpec&>(l), name);
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p += ".bin";
  return p;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  json layers = json::array();
  std::string blob;
  for (const LayerSpec& l : model.layers()) {
    json j{{"kind", to_string(l.kind)},
           {"trainable", l.trainable},
           {"input_shape", l.input_shape},
           {"output_shape", l.output_shape}};
    switch (l.kind) {
      case LayerKind::Dense: j["units"] = l.units; break;
      case LayerKind::Conv2D:
        j["filters"] = l.filters;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding == Padding::Same ? "same" : "valid";
        break;
      case LayerKind::MaxPool2D:
      case LayerKind::AvgPool2D:
        j["window"] = l.window;
        j["stride"] = l.stride;
        break;
      case LayerKind::PolyAct: j["degree"] = l.degree; break;
      case LayerKind::BatchNorm:
        j["epsilon"] = l.epsilon;
        j["momentum"] = l.momentum;
        break;
      case LayerKind::Dropout: j["rate"] = l.rate; break;
      default: break;
    }
    json tensors = json::array();
    for (const char* name : kTensorNames) {
      const Tensor& t = tensor_by_name(l, name);
      if (t.empty()) continue;
      tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size() / 8}, {"count", t.size()}});
      for (double v : t.values()) put_le(blob, v);
    }
    j["tensors"] = std::move(tensors);
    layers.push_back(std::move(j));
  }
  json manifest{{"format", "mofhei-model"},
                {"schema_version", kModelSchemaVersion},
                {"input_shape", model.input_shape()},
                {"metadata", model.metadata()},
                {"blob", blob_path(path).filename().string()},
                {"blob_bytes", blob.size()},
                {"layers", std::move(layers)}};

  const auto bin = blob_path(path);
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + bin.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json m;
  try {
    m = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed manifest: " + e.what(), e.byte);
  }
  try {
    if (m.value("format", "") != "mofhei-model") throw ParseError(path.string() + ": not a model manifest", 0);
    const int version = m.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw VersionError(path.string() + ": schema version " + std::to_string(version) + ", expected " +
                         std::to_string(kModelSchemaVersion));
    }
    const auto bin = path.parent_path() / m.at("blob").get<std::string>();
    const std::string blob = read_file(bin);
    const auto expected = m.at("blob_bytes").get<std::size_t>();
    if (blob.size() != expected) {
      throw ParseError(bin.string() + ": blob holds " + std::to_string(blob.size()) + " bytes, manifest declares " +
                           std::to_string(expected),
                       blob.size());
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());

    Model model(m.at("input_shape").get<Shape>());
    if (m.contains("metadata")) model.metadata() = m["metadata"].get<std::map<std::string, std::string>>();
    for (const json& j : m.at("layers")) {
      const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
      if (!kind) throw ParseError(path.string() + ": unknown layer kind " + j["kind"].dump(), 0);
      LayerSpec l;
      l.kind = *kind;
      l.trainable = j.value("trainable", true);
      l.units = j.value("units", std::size_t{0});
      l.filters = j.value("filters", std::size_t{0});
      if (j.contains("kernel")) l.kernel = j["kernel"].get<std::array<std::size_t, 2>>();
      if (j.contains("stride")) l.stride = j["stride"].get<std::array<std::size_t, 2>>();
      if (j.contains("window")) l.window = j["window"].get<std::array<std::size_t, 2>>();
      if (j.value("padding", "valid") == "same") l.padding = Padding::Same;
      l.degree = j.value("degree", 0);
      l.rate = j.value("rate", 0.0);
      l.epsilon = j.value("epsilon", 1e-3);
      l.momentum = j.value("momentum", 0.99);
      l.input_shape = j.at("input_shape").get<Shape>();
      l.output_shape = j.at("output_shape").get<Shape>();
      for (const json& t : j.at("tensors")) {
        Tensor* dst = tensor_by_name(l, t.at("name").get<std::string>());
        if (!dst) throw ParseError(path.string() + ": unknown tensor " + t["name"].dump(), 0);
        const Shape shape = t.at("shape").get<Shape>();
        const auto offset = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        if (count != shape_size(shape)) throw ParseError(path.string() + ": tensor count/shape mismatch", 0);
        if ((offset + count) * 8 > blob.size()) throw ParseError(bin.string() + ": tensor past end of blob", blob.size());
        std::vector<double> values(count);
        for (std::size_t k = 0; k < count; ++k) values[k] = get_le(bytes + (offset + k) * 8);
        *dst = Tensor(shape, std::move(values));
      }
      model.layers().push_back(std::move(l));
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": invalid manifest: " + e.what(), 0);
  }
}

}  // namespace mofhei
