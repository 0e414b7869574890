// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mofhei/tensor.hpp"

namespace mofhei {

enum class LayerKind {
  Dense,
  Conv2D,
  MaxPool2D,
  AvgPool2D,
  PolyAct,
  SquareAct,
  ReLU,
  Sigmoid,
  Softmax,
  Flatten,
  BatchNorm,
  Dropout,
};

enum class Padding { Valid, Same };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

/// One layer of a sequential model: its configuration, its shapes (without the
/// batch dimension) and its parameters.
///
/// Parameter layouts:
///   Dense      weights (inputs, units), bias (units)
///   Conv2D     weights (I, J, K, F) row-major, i.e. an (I*J*K, F) matrix; bias (F)
///   PolyAct    coeffs (degree + 1), coeffs[k] multiplies x^k
///   BatchNorm  gamma, beta, moving_mean, moving_var, all (channels)
struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;

  std::size_t units = 0;
  std::size_t filters = 0;
  std::array<std::size_t, 2> kernel{1, 1};
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> window{2, 2};
  Padding padding = Padding::Valid;
  int degree = 0;
  double rate = 0.0;
  double epsilon = 1e-3;
  double momentum = 0.99;
  bool trainable = true;

  Shape input_shape;
  Shape output_shape;

  Tensor weights;
  Tensor bias;
  Tensor coeffs;
  Tensor gamma;
  Tensor beta;
  Tensor moving_mean;
  Tensor moving_var;

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv2d(std::size_t filters, std::array<std::size_t, 2> kernel,
                          std::array<std::size_t, 2> stride = {1, 1},
                          Padding padding = Padding::Valid);
  static LayerSpec max_pool(std::array<std::size_t, 2> window,
                            std::array<std::size_t, 2> stride);
  static LayerSpec avg_pool(std::array<std::size_t, 2> window,
                            std::array<std::size_t, 2> stride);
  static LayerSpec poly(int degree);
  static LayerSpec square();
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec softmax();
  static LayerSpec flatten();
  static LayerSpec batch_norm(double epsilon = 1e-3);
  static LayerSpec dropout(double rate);

  bool has_weights() const noexcept {
    return kind == LayerKind::Dense || kind == LayerKind::Conv2D;
  }
  bool is_activation() const noexcept {
    return kind == LayerKind::ReLU || kind == LayerKind::Sigmoid;
  }
  /// Pointers to the learnable tensors, in serialization order.
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  /// All stored tensors (learnable plus moving statistics), in serialization order.
  std::vector<Tensor*> state();
  std::vector<const Tensor*> state() const;
  std::size_t param_count() const;

  /// Rows of the (rows, cols) weight-matrix view: inputs for Dense, I*J*K for Conv2D.
  std::size_t weight_rows() const;
  /// Columns of the weight-matrix view: units or filters.
  std::size_t weight_cols() const;
};

/// Spatial output size along one axis.
std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride, Padding pad);
/// Leading zero padding along one axis for `Padding::Same` (the remainder goes after).
std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride);

/// Computes `output_shape` from `input_shape` and the configuration.
/// Throws ShapeError when the input shape is incompatible.
Shape infer_output_shape(const LayerSpec& layer, const Shape& input);

}  // namespace mofhei
