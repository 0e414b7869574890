// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mofhei/nn.hpp"

namespace mofhei {

namespace {

constexpr std::size_t kEvalBatch = 256;

/// Number of leading layers run before the loss; a trailing Softmax (with cross
/// entropy) or Sigmoid (with binary cross entropy) is folded into the loss.
std::size_t loss_layers(const Model& model, Loss loss) {
  const std::size_t n = model.size();
  if (n == 0) return 0;
  const LayerKind last = model.layers().back().kind;
  if ((last == LayerKind::Softmax && loss == Loss::CrossEntropy) ||
      (last == LayerKind::Sigmoid && loss == Loss::BinaryCrossEntropy))
    return n - 1;
  return n;
}

Tensor forward_prefix(const Model& model, const Tensor& x, std::size_t count, const WeightMasks* masks) {
  Tensor out = x;
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor* m = masks && i < masks->size() && !(*masks)[i].empty() ? &(*masks)[i] : nullptr;
    out = nn::layer_forward(model.layer(i), out, m);
  }
  return out;
}

struct Snapshot {
  std::vector<LayerSpec> layers;
};

double log_sum_exp_row(const double* row, std::size_t d) {
  const double mx = *std::max_element(row, row + d);
  double s = 0;
  for (std::size_t i = 0; i < d; ++i) s += std::exp(row[i] - mx);
  return mx + std::log(s);
}

}  // namespace

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  return {x.slice(begin, end), y.slice(begin, end)};
}

Dataset Dataset::gather(std::span<const std::size_t> rows) const {
  return {x.gather(rows), y.gather(rows)};
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > min_learning_rate)) throw ConfigError("learning_rate must exceed min_learning_rate");
  if (patience_epochs < 1) throw ConfigError("patience_epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (lr_halving_period < 1) throw ConfigError("lr_halving_period must be >= 1");
}

Metric monitor_metric(Loss loss) { return loss == Loss::Mse ? Metric::Mse : Metric::Accuracy; }

double loss_and_grad(Loss loss, const Tensor& out, const Tensor& target, Tensor* grad) {
  if (out.size() != target.size()) {
    throw ShapeError("loss: output " + shape_str(out.shape()) + " vs target " + shape_str(target.shape()));
  }
  const std::size_t n = out.dim(0);
  const std::size_t d = out.size() / std::max<std::size_t>(n, 1);
  if (grad) *grad = Tensor(out.shape());
  double total = 0;
  switch (loss) {
    case Loss::Mse: {
      const double count = static_cast<double>(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double e = out[i] - target[i];
        total += e * e;
        if (grad) (*grad)[i] = 2.0 * e / count;
      }
      return total / count;
    }
    case Loss::CrossEntropy: {
      for (std::size_t b = 0; b < n; ++b) {
        const double* row = out.data() + b * d;
        const double lse = log_sum_exp_row(row, d);
        for (std::size_t i = 0; i < d; ++i) {
          const double t = target[b * d + i];
          total -= t * (row[i] - lse);
          if (grad) (*grad)[b * d + i] = (std::exp(row[i] - lse) - t) / static_cast<double>(n);
        }
      }
      return total / static_cast<double>(n);
    }
    case Loss::BinaryCrossEntropy: {
      const double count = static_cast<double>(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = out[i], t = target[i];
        total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        if (grad) {
          const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
          (*grad)[i] = (p - t) / count;
        }
      }
      return total / count;
    }
  }
  return total;
}

double evaluate_loss(const Model& model, const Dataset& data, Loss loss, const WeightMasks* masks) {
  if (data.size() == 0) throw Error("evaluate_loss: empty dataset");
  const std::size_t count = loss_layers(model, loss);
  double total = 0;
  for (std::size_t b = 0; b < data.size(); b += kEvalBatch) {
    const std::size_t e = std::min(data.size(), b + kEvalBatch);
    const Tensor out = forward_prefix(model, data.x.slice(b, e), count, masks);
    total += loss_and_grad(loss, out, data.y.slice(b, e), nullptr) * static_cast<double>(e - b);
  }
  return total / static_cast<double>(data.size());
}

double evaluate(const Model& model, const Dataset& data, Metric metric, const WeightMasks* masks) {
  if (data.size() == 0) throw Error("evaluate: empty dataset");
  double score = 0;
  std::size_t elements = 0;
  for (std::size_t b = 0; b < data.size(); b += kEvalBatch) {
    const std::size_t e = std::min(data.size(), b + kEvalBatch);
    const Tensor out = forward_prefix(model, data.x.slice(b, e), model.size(), masks);
    const Tensor y = data.y.slice(b, e);
    if (out.size() != y.size()) {
      throw ShapeError("evaluate: output " + shape_str(out.shape()) + " vs target " + shape_str(y.shape()));
    }
    if (metric == Metric::Mse) {
      for (std::size_t i = 0; i < out.size(); ++i) score += (out[i] - y[i]) * (out[i] - y[i]);
      elements += out.size();
      continue;
    }
    const std::size_t d = out.size() / (e - b);
    const bool probs = !model.layers().empty() && model.layers().back().kind == LayerKind::Sigmoid;
    for (std::size_t r = 0; r < e - b; ++r) {
      const double* o = out.data() + r * d;
      const double* t = y.data() + r * d;
      if (d == 1) {
        const bool pred = probs ? o[0] > 0.5 : o[0] > 0.0;
        score += pred == (t[0] > 0.5) ? 1.0 : 0.0;
      } else {
        const auto po = std::max_element(o, o + d) - o;
        const auto pt = std::max_element(t, t + d) - t;
        score += po == pt ? 1.0 : 0.0;
      }
    }
    elements += e - b;
  }
  return score / static_cast<double>(elements);
}

TrainHistory train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                   const TrainHooks& hooks) {
  cfg.validate();
  TrainHistory history;
  if (cfg.epochs == 0) return history;
  if (train_set.size() == 0 || val_set.size() == 0) throw Error("train: empty dataset");

  const Metric metric = monitor_metric(cfg.loss);
  const bool higher_better = metric == Metric::Accuracy;
  const std::size_t n_layers = model.size();
  const std::size_t fwd_layers = loss_layers(model, cfg.loss);
  const std::size_t first_trainable = hooks.frozen_prefix.value_or(0);

  auto mask_of = [&](std::size_t i) -> const Tensor* {
    if (!hooks.masks || i >= hooks.masks->size() || (*hooks.masks)[i].empty()) return nullptr;
    return &(*hooks.masks)[i];
  };

  // Optimizer state, one entry per parameter tensor.
  std::vector<std::vector<Tensor>> m1(n_layers), m2(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i)
    for (const Tensor* p : model.layer(i).params()) {
      m1[i].emplace_back(p->shape());
      m2[i].emplace_back(p->shape());
    }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::LayerCache> caches(fwd_layers);
  std::vector<Tensor> grads;

  double lr = cfg.learning_rate;
  double best = higher_better ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  bool have_best = false;
  int wait = 0, lr_wait = 0;
  Snapshot best_state;
  std::int64_t step = 0;
  std::int64_t adam_t = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      if (hooks.before_step) hooks.before_step(step);
      const std::span<const std::size_t> rows(order.data() + b, e - b);
      const Dataset batch = train_set.gather(rows);

      Tensor act = batch.x;
      for (std::size_t i = 0; i < fwd_layers; ++i)
        act = nn::forward_train(model.layer(i), act, caches[i], rng, mask_of(i),
                                 i >= first_trainable && model.layer(i).trainable);
      Tensor grad;
      const double loss = loss_and_grad(cfg.loss, act, batch.y, &grad);
      if (!std::isfinite(loss)) throw DivergenceError(epoch);
      loss_sum += loss * static_cast<double>(e - b);

      ++adam_t;
      for (std::size_t i = fwd_layers; i-- > 0;) {
        LayerSpec& layer = model.layer(i);
        const Tensor* mask = mask_of(i);
        Tensor gin = nn::backward(layer, caches[i], grad, grads, mask);
        if (i >= first_trainable && layer.trainable) {
          auto params = layer.params();
          for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor& w = *params[p];
            const Tensor& g = grads[p];
            const Tensor* cell_mask = (p == 0 && layer.has_weights()) ? mask : nullptr;
            Tensor& s1 = m1[i][p];
            Tensor& s2 = m2[i][p];
            if (cfg.optimizer == Optimizer::Adam) {
              constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-7;
              const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t));
              const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t));
              for (std::size_t k = 0; k < w.size(); ++k) {
                if (cell_mask && (*cell_mask)[k] == 0.0) continue;
                s1[k] = b1 * s1[k] + (1 - b1) * g[k];
                s2[k] = b2 * s2[k] + (1 - b2) * g[k] * g[k];
                w[k] -= lr * (s1[k] / c1) / (std::sqrt(s2[k] / c2) + eps);
              }
            } else {
              for (std::size_t k = 0; k < w.size(); ++k) {
                if (cell_mask && (*cell_mask)[k] == 0.0) continue;
                s1[k] = cfg.momentum * s1[k] - lr * g[k];
                w[k] += s1[k];
              }
            }
          }
        }
        if (i > 0) grad = std::move(gin);
      }
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.learning_rate = lr;
    rec.val_loss = evaluate_loss(model, val_set, cfg.loss, hooks.masks);
    rec.val_metric = metric == Metric::Mse ? rec.val_loss : evaluate(model, val_set, metric, hooks.masks);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) throw DivergenceError(epoch);
    history.epochs.push_back(rec);

    const bool tracking = !hooks.early_stop_enabled || hooks.early_stop_enabled();
    if (!tracking) continue;
    const bool improved = !have_best || (higher_better ? rec.val_metric > best : rec.val_metric < best);
    if (improved) {
      best = rec.val_metric;
      have_best = true;
      wait = lr_wait = 0;
      if (cfg.restore_best) best_state.layers = model.layers();
    } else {
      ++wait;
      if (++lr_wait >= cfg.lr_halving_period) {
        lr = std::max(lr * 0.5, cfg.min_learning_rate);
        lr_wait = 0;
      }
      if (wait >= cfg.patience_epochs) {
        history.early_stopped = true;
        break;
      }
    }
  }
  history.best_val_metric = best;
  if (cfg.restore_best && have_best && !best_state.layers.empty()) model.layers() = std::move(best_state.layers);
  return history;
}

}  // namespace mofhei
