// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/model.hpp"

#include <cmath>
#include <random>

#include "mofhei/nn.hpp"

namespace mofhei {

Model& Model::add(LayerSpec layer) {
  layer.input_shape = output_shape();
  try {
    layer.output_shape = infer_output_shape(layer, layer.input_shape);
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(layers_.size()) + ": " + e.what());
  }
  layers_.push_back(std::move(layer));
  return *this;
}

Shape Model::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().output_shape;
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const std::size_t fan_in = l.weight_rows();
        std::size_t fan_out = l.weight_cols();
        if (l.kind == LayerKind::Conv2D) fan_out *= l.kernel[0] * l.kernel[1];
        bool relu_next = false;
        for (std::size_t j = i + 1; j < layers_.size(); ++j) {
          const LayerKind k = layers_[j].kind;
          if (k == LayerKind::BatchNorm || k == LayerKind::Dropout) continue;
          relu_next = k == LayerKind::ReLU;
          break;
        }
        const double limit = relu_next ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                       : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        l.weights = l.kind == LayerKind::Dense ? Tensor({fan_in, l.units})
                                               : Tensor({l.kernel[0], l.kernel[1], l.input_shape[2], l.filters});
        for (double& w : l.weights.values()) w = dist(rng);
        l.bias = Tensor({l.weight_cols()});
        break;
      }
      case LayerKind::PolyAct:
        if (l.coeffs.size() != static_cast<std::size_t>(l.degree + 1))
          l.coeffs = Tensor({static_cast<std::size_t>(l.degree + 1)});
        break;
      case LayerKind::BatchNorm: {
        const std::size_t c = l.input_shape.back();
        l.gamma = Tensor({c}, 1.0);
        l.beta = Tensor({c});
        l.moving_mean = Tensor({c});
        l.moving_var = Tensor({c}, 1.0);
        break;
      }
      default: break;
    }
  }
}

void Model::reshape_chain() {
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      layers_[i].input_shape = cur;
      layers_[i].output_shape = infer_output_shape(layers_[i], cur);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
    cur = layers_[i].output_shape;
  }
}

void Model::validate() const {
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    if (l.input_shape != cur) {
      throw ShapeError(where + ": declared input " + shape_str(l.input_shape) + ", predecessor produces " +
                       shape_str(cur));
    }
    Shape out;
    try {
      out = infer_output_shape(l, cur);
    } catch (const ShapeError& e) {
      throw ShapeError(where + ": " + e.what());
    }
    if (out != l.output_shape) {
      throw ShapeError(where + ": declared output " + shape_str(l.output_shape) + ", expected " + shape_str(out));
    }
    auto expect = [&](const Tensor& t, const Shape& s, const char* name) {
      if (t.shape() != s) {
        throw ShapeError(where + ": " + name + " shape " + shape_str(t.shape()) + ", expected " + shape_str(s));
      }
    };
    if (l.kind == LayerKind::Dense) {
      expect(l.weights, {l.weight_rows(), l.units}, "weights");
      expect(l.bias, {l.units}, "bias");
    } else if (l.kind == LayerKind::Conv2D) {
      expect(l.weights, {l.kernel[0], l.kernel[1], cur[2], l.filters}, "weights");
      expect(l.bias, {l.filters}, "bias");
    } else if (l.kind == LayerKind::PolyAct) {
      expect(l.coeffs, {static_cast<std::size_t>(l.degree + 1)}, "coeffs");
    } else if (l.kind == LayerKind::BatchNorm) {
      const Shape c{cur.back()};
      expect(l.gamma, c, "gamma");
      expect(l.beta, c, "beta");
      expect(l.moving_mean, c, "moving_mean");
      expect(l.moving_var, c, "moving_var");
    }
    cur = out;
  }
}

std::size_t Model::output_layer_index() const {
  for (std::size_t i = layers_.size(); i-- > 0;)
    if (layers_[i].has_weights()) return i;
  throw Error("model has no parameterized output layer");
}

Tensor Model::predict(const Tensor& batch) const { return predict(batch, {}); }

Tensor Model::predict(const Tensor& batch, const WeightMasks& masks) const {
  Tensor x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Tensor* mask = i < masks.size() && !masks[i].empty() ? &masks[i] : nullptr;
    try {
      x = nn::layer_forward(layers_[i], x, mask);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return x;
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

void Model::insert(std::size_t index, LayerSpec layer) {
  layers_.insert(layers_.begin() + static_cast<std::ptrdiff_t>(index), std::move(layer));
  reshape_chain();
}

void Model::erase(std::size_t index) {
  layers_.erase(layers_.begin() + static_cast<std::ptrdiff_t>(index));
  reshape_chain();
}

bool operator==(const LayerSpec& a, const LayerSpec& b) {
  return a.kind == b.kind && a.units == b.units && a.filters == b.filters && a.kernel == b.kernel &&
         a.stride == b.stride && a.window == b.window && a.padding == b.padding && a.degree == b.degree &&
         a.rate == b.rate && a.epsilon == b.epsilon && a.momentum == b.momentum && a.trainable == b.trainable &&
         a.input_shape == b.input_shape && a.output_shape == b.output_shape && a.weights == b.weights &&
         a.bias == b.bias && a.coeffs == b.coeffs && a.gamma == b.gamma && a.beta == b.beta &&
         a.moving_mean == b.moving_mean && a.moving_var == b.moving_var;
}

bool operator==(const Model& a, const Model& b) {
  return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_ && a.metadata_ == b.metadata_;
}

}  // namespace mofhei
