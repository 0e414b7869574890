// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mofhei/layer.hpp"
#include "mofhei/tensor.hpp"

namespace mofhei::nn {

/// Inference-mode forward pass of one layer. `input` is either one sample
/// shaped like `layer.input_shape` or a batch with a leading batch dimension;
/// the result follows the same convention. Dropout is the identity and
/// BatchNorm uses its moving statistics.
Tensor layer_forward(const LayerSpec& layer, const Tensor& input);

/// Same, with an elementwise weight mask applied to Dense/Conv2D weights.
Tensor layer_forward(const LayerSpec& layer, const Tensor& input, const Tensor* weight_mask);

/// State captured by a training-mode forward pass for the backward pass.
struct LayerCache {
  Tensor input;
  Tensor output;
  Tensor aux;                      // im2col matrix, BN x-hat, dropout mask
  std::vector<double> batch_stats; // BN: per-channel inverse std
  std::vector<std::size_t> argmax; // MaxPool: winning input index per output
};

/// Training-mode forward over a batch. BatchNorm uses batch statistics and
/// updates its moving averages when `update_stats` is set; Dropout samples
/// from `rng`.
Tensor forward_train(LayerSpec& layer, const Tensor& batch, LayerCache& cache, std::mt19937_64& rng,
                     const Tensor* weight_mask, bool update_stats = true);

/// Gradients for one layer. `param_grads` receives one tensor per
/// `layer.params()` entry (same shapes). Returns the gradient w.r.t. the input.
Tensor backward(const LayerSpec& layer, const LayerCache& cache, const Tensor& grad_out,
                std::vector<Tensor>& param_grads, const Tensor* weight_mask);

/// im2col of a batch: rows enumerate (sample, u, v) and columns (i, j, k),
/// both row-major; zero-padding cells read as 0.
Tensor im2col(const LayerSpec& conv, const Tensor& batch);

}  // namespace mofhei::nn
