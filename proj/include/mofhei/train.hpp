// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mofhei/model.hpp"
#include "mofhei/tensor.hpp"

namespace mofhei {

/// Inputs `x` (n, ...) and targets `y` (n, ...). Classification targets are one-hot
/// (or a single 0/1 column for binary problems); autoencoders use y == x.
struct Dataset {
  Tensor x;
  Tensor y;

  std::size_t size() const { return x.empty() ? 0 : x.dim(0); }
  Dataset subset(std::size_t begin, std::size_t end) const;
  Dataset gather(std::span<const std::size_t> rows) const;
};

enum class Loss { CrossEntropy, Mse, BinaryCrossEntropy };
enum class Optimizer { SgdMomentum, Adam };
enum class Metric { Accuracy, Mse };

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  int patience_epochs = 10;
  int lr_halving_period = 5;
  double min_learning_rate = 1e-7;
  std::size_t batch_size = 64;
  Loss loss = Loss::CrossEntropy;
  Optimizer optimizer = Optimizer::Adam;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  /// Keep the parameters of the best validation epoch once training ends.
  bool restore_best = true;

  void validate() const;
};

/// Metric tracked for patience and learning-rate halving.
Metric monitor_metric(Loss loss);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
  double learning_rate = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
  double best_val_metric = 0.0;
};

/// Extension points used by pruning and layer conversion.
struct TrainHooks {
  /// Layers with index < frozen_prefix receive no updates.
  std::optional<std::size_t> frozen_prefix;
  /// Elementwise weight masks gating Dense/Conv2D weights: masked cells read as
  /// zero in the forward pass and are never updated.
  const WeightMasks* masks = nullptr;
  /// Called before every optimizer step with the global step index.
  std::function<void(std::int64_t step)> before_step;
  /// Early stopping and best-weight tracking only start once this returns true.
  std::function<bool()> early_stop_enabled;
};

/// Mini-batch training with early stopping on the validation metric and
/// learning-rate halving after `lr_halving_period` non-improving epochs.
/// Throws DivergenceError on a non-finite loss.
TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean loss of `model` on `data` (inference mode).
double evaluate_loss(const Model& model, const Dataset& data, Loss loss,
                     const WeightMasks* masks = nullptr);

/// Accuracy (argmax, or threshold 0.5 for single-unit outputs read as logits)
/// or mean squared error over all elements.
double evaluate(const Model& model, const Dataset& data, Metric metric,
                const WeightMasks* masks = nullptr);

/// Loss value and gradient with respect to the model output (logits).
double loss_and_grad(Loss loss, const Tensor& output, const Tensor& target, Tensor* grad);

}  // namespace mofhei
