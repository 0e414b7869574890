// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mofhei/model.hpp"
#include "mofhei/train.hpp"

namespace mofhei::transform {

enum class ActivationMode { Poly, Square };

struct HefConfig {
  int poly_degree = 2;
  ActivationMode activation_mode = ActivationMode::Poly;
  int transfer_epochs = 100;
  int finetune_epochs = 100;
  double transfer_lr = 1e-3;
  double finetune_lr = 1e-4;
  int patience = 10;
  double coeff_init_scale = 0.01;
  std::uint64_t seed = 1;
  std::size_t batch_size = 64;
  Loss loss = Loss::CrossEntropy;

  void validate() const;
  /// Training settings for one retraining phase.
  TrainConfig phase(int epochs, double lr) const;
};

struct ConversionEntry {
  std::size_t layer_index = 0;
  std::string from_kind;
  std::string to_kind;
  double val_metric_before = 0.0;
  double val_metric_after = 0.0;
  int epochs_used = 0;
};

struct ConversionLog {
  std::vector<ConversionEntry> entries;
  nlohmann::json to_json() const;
};

/// Only Dense, Conv2D, AvgPool2D, PolyAct, SquareAct and Flatten layers, plus
/// an optional trailing Softmax (dropped for encrypted inference).
bool is_he_friendly(const Model& model);

/// MaxPool2D at `pool_index` becomes an AvgPool2D with the same window and
/// stride; the layers after it are retrained at the transfer rate, then the
/// whole model is fine-tuned.
Model convert_pooling(Model model, std::size_t pool_index, const Dataset& train, const Dataset& val,
                      const HefConfig& cfg, ConversionEntry* entry = nullptr);

/// ReLU/Sigmoid at `act_index` becomes a trainable polynomial (coefficients
/// first trained alone, then a full fine-tune) or a square (fine-tune only).
Model convert_activation(Model model, std::size_t act_index, ActivationMode mode, const Dataset& train,
                         const Dataset& val, const HefConfig& cfg, ConversionEntry* entry = nullptr);

/// Absorbs every BatchNorm into the Dense/Conv2D layer directly before it.
Model fold_batchnorm(Model model);
Model strip_dropout(Model model);

struct HefResult {
  Model model;
  ConversionLog log;
  /// Validation metric of the converted model.
  double metric = 0.0;
};

/// Strips dropout and folds batch norm, then converts max-pools and then
/// activations, each latest-first, retraining after every single conversion.
HefResult make_he_friendly(Model model, const Dataset& train, const Dataset& val, const HefConfig& cfg);

}  // namespace mofhei::transform
