// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/transform.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

namespace mofhei::transform {

namespace {

double val_metric(const Model& m, const Dataset& val, Loss loss) {
  return monitor_metric(loss) == Metric::Mse ? evaluate_loss(m, val, loss) : evaluate(m, val, Metric::Accuracy);
}

int run(Model& m, const Dataset& train_set, const Dataset& val, const TrainConfig& tc, const TrainHooks& hooks = {}) {
  return static_cast<int>(train(m, train_set, val, tc, hooks).epochs.size());
}

}  // namespace

void HefConfig::validate() const {
  if (poly_degree < 1) throw ConfigError("poly_degree must be >= 1");
  if (!(transfer_lr > finetune_lr && finetune_lr > 0)) throw ConfigError("need transfer_lr > finetune_lr > 0");
  if (transfer_epochs < 0 || finetune_epochs < 0) throw ConfigError("epochs must be >= 0");
}

TrainConfig HefConfig::phase(int epochs, double lr) const {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = lr;
  tc.patience_epochs = patience;
  tc.batch_size = batch_size;
  tc.loss = loss;
  tc.seed = seed;
  return tc;
}

nlohmann::json ConversionLog::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries) {
    out.push_back({{"layer_index", e.layer_index},
                   {"from_kind", e.from_kind},
                   {"to_kind", e.to_kind},
                   {"val_metric_before", e.val_metric_before},
                   {"val_metric_after", e.val_metric_after},
                   {"epochs_used", e.epochs_used}});
  }
  return out;
}

bool is_he_friendly(const Model& model) {
  const auto& ls = model.layers();
  for (std::size_t i = 0; i < ls.size(); ++i) {
    switch (ls[i].kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D:
      case LayerKind::AvgPool2D:
      case LayerKind::PolyAct:
      case LayerKind::SquareAct:
      case LayerKind::Flatten: break;
      case LayerKind::Softmax:
        if (i + 1 != ls.size()) return false;
        break;
      default: return false;
    }
  }
  return true;
}

Model convert_pooling(Model model, std::size_t idx, const Dataset& train_set, const Dataset& val, const HefConfig& cfg,
                      ConversionEntry* entry) {
  cfg.validate();
  if (idx >= model.size() || model.layer(idx).kind != LayerKind::MaxPool2D) {
    throw Error("convert_pooling: layer " + std::to_string(idx) + " is not a MaxPool2D");
  }
  ConversionEntry e{idx, "MaxPool2D", "AvgPool2D", val_metric(model, val, cfg.loss), 0.0, 0};
  LayerSpec& l = model.layer(idx);
  l.kind = LayerKind::AvgPool2D;

  TrainHooks subsequent;
  subsequent.frozen_prefix = idx + 1;
  e.epochs_used += run(model, train_set, val, cfg.phase(cfg.transfer_epochs, cfg.transfer_lr), subsequent);
  e.epochs_used += run(model, train_set, val, cfg.phase(cfg.finetune_epochs, cfg.finetune_lr));
  e.val_metric_after = val_metric(model, val, cfg.loss);
  if (entry) *entry = e;
  return model;
}

Model convert_activation(Model model, std::size_t idx, ActivationMode mode, const Dataset& train_set,
                         const Dataset& val, const HefConfig& cfg, ConversionEntry* entry) {
  cfg.validate();
  if (idx >= model.size() || !model.layer(idx).is_activation()) {
    throw Error("convert_activation: layer " + std::to_string(idx) + " is not a ReLU/Sigmoid activation");
  }
  ConversionEntry e{idx, std::string(to_string(model.layer(idx).kind)), "", val_metric(model, val, cfg.loss), 0.0, 0};
  const Shape in = model.layer(idx).input_shape;

  if (mode == ActivationMode::Square) {
    LayerSpec sq = LayerSpec::square();
    sq.input_shape = sq.output_shape = in;
    model.layer(idx) = std::move(sq);
    e.to_kind = "SquareAct";
  } else {
    LayerSpec p = LayerSpec::poly(cfg.poly_degree);
    p.input_shape = p.output_shape = in;
    std::mt19937_64 rng(cfg.seed + idx);
    std::uniform_real_distribution<double> init(-cfg.coeff_init_scale, cfg.coeff_init_scale);
    for (double& c : p.coeffs.values()) c = init(rng);
    model.layer(idx) = std::move(p);
    e.to_kind = "PolyAct";

    // Coefficients only.
    std::vector<bool> saved;
    for (auto& l : model.layers()) {
      saved.push_back(l.trainable);
      l.trainable = false;
    }
    model.layer(idx).trainable = true;
    e.epochs_used += run(model, train_set, val, cfg.phase(cfg.transfer_epochs, cfg.transfer_lr));
    for (std::size_t i = 0; i < model.size(); ++i) model.layer(i).trainable = saved[i];
  }
  e.epochs_used += run(model, train_set, val, cfg.phase(cfg.finetune_epochs, cfg.finetune_lr));
  e.val_metric_after = val_metric(model, val, cfg.loss);
  if (entry) *entry = e;
  return model;
}

Model fold_batchnorm(Model model) {
  for (std::size_t i = 0; i < model.size();) {
    if (model.layer(i).kind != LayerKind::BatchNorm) {
      ++i;
      continue;
    }
    if (i == 0 || !model.layer(i - 1).has_weights()) {
      throw Error("fold_batchnorm: BatchNorm at layer " + std::to_string(i) +
                  " does not directly follow a Dense/Conv2D layer");
    }
    const LayerSpec bn = model.layer(i);
    LayerSpec& prev = model.layer(i - 1);
    const std::size_t rows = prev.weight_rows(), cols = prev.weight_cols();
    for (std::size_t c = 0; c < cols; ++c) {
      const double scale = bn.gamma[c] / std::sqrt(bn.moving_var[c] + bn.epsilon);
      for (std::size_t r = 0; r < rows; ++r) prev.weights[r * cols + c] *= scale;
      prev.bias[c] = (prev.bias[c] - bn.moving_mean[c]) * scale + bn.beta[c];
    }
    model.erase(i);
  }
  return model;
}

Model strip_dropout(Model model) {
  for (std::size_t i = model.size(); i-- > 0;)
    if (model.layer(i).kind == LayerKind::Dropout) model.erase(i);
  return model;
}

HefResult make_he_friendly(Model model, const Dataset& train_set, const Dataset& val, const HefConfig& cfg) {
  cfg.validate();
  HefResult result;
  if (is_he_friendly(model)) {
    result.metric = val_metric(model, val, cfg.loss);
    result.model = std::move(model);
    return result;
  }
  model = fold_batchnorm(strip_dropout(std::move(model)));

  for (std::size_t i = model.size(); i-- > 0;) {
    if (model.layer(i).kind != LayerKind::MaxPool2D) continue;
    ConversionEntry e;
    model = convert_pooling(std::move(model), i, train_set, val, cfg, &e);
    result.log.entries.push_back(e);
  }
  for (std::size_t i = model.size(); i-- > 0;) {
    if (!model.layer(i).is_activation()) continue;
    ConversionEntry e;
    model = convert_activation(std::move(model), i, cfg.activation_mode, train_set, val, cfg, &e);
    result.log.entries.push_back(e);
  }
  if (!is_he_friendly(model)) throw Error("make_he_friendly: model still contains unsupported layers");
  model.metadata()["stage"] = "he_friendly";
  result.metric = val_metric(model, val, cfg.loss);
  result.model = std::move(model);
  return result;
}

}  // namespace mofhei::transform
