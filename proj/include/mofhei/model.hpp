// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mofhei/layer.hpp"
#include "mofhei/tensor.hpp"

namespace mofhei {

/// Per-layer elementwise weight masks (empty tensor = unmasked). Indexed by
/// layer position; shorter vectors leave the remaining layers unmasked.
using WeightMasks = std::vector<Tensor>;

/// Sequential model. Shapes exclude the batch dimension.
class Model {
 public:
  Model() = default;
  explicit Model(Shape input_shape) : input_shape_(std::move(input_shape)) {}

  /// Appends a layer, wiring its input shape to the current output shape.
  Model& add(LayerSpec layer);

  /// Draws fresh parameters: He-uniform for layers feeding a ReLU, Glorot-uniform
  /// otherwise; biases zero; BatchNorm at identity.
  void initialize(std::uint64_t seed);

  /// Recomputes every layer's input/output shape; throws ShapeError with the
  /// offending layer index on inconsistency. Also checks parameter shapes.
  void validate() const;
  void reshape_chain();

  const Shape& input_shape() const noexcept { return input_shape_; }
  Shape output_shape() const;
  std::vector<LayerSpec>& layers() noexcept { return layers_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  LayerSpec& layer(std::size_t i) { return layers_.at(i); }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t size() const noexcept { return layers_.size(); }

  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  /// Index of the last Dense/Conv2D layer; the model's output layer.
  std::size_t output_layer_index() const;

  /// Inference-mode forward pass on a batch (n, input_shape...).
  Tensor predict(const Tensor& batch) const;
  Tensor predict(const Tensor& batch, const WeightMasks& masks) const;

  std::size_t param_count() const;

  void insert(std::size_t index, LayerSpec layer);
  void erase(std::size_t index);

  friend bool operator==(const Model& a, const Model& b);

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::map<std::string, std::string> metadata_;
};

bool operator==(const LayerSpec& a, const LayerSpec& b);

}  // namespace mofhei
