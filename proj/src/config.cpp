// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "toml.hpp"

namespace mofhei {

namespace {

using Setter = std::function<void(const toml::node&)>;

std::string where(const toml::node& n, const std::string& key) {
  return key + " (line " + std::to_string(n.source().begin.line) + ")";
}

template <typename T>
T need(const toml::node& n, const std::string& key) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n.value<double>()) return *v;  // integers convert too
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = n.as_boolean()) return v->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = n.as_string()) return v->get();
  } else {
    if (auto v = n.as_integer()) {
      if (v->get() < 0) throw ConfigError(where(n, key) + " must be non-negative");
      return static_cast<T>(v->get());
    }
  }
  throw ConfigError(where(n, key) + " has the wrong type");
}

template <typename T>
Setter set(T& field, const std::string& key) {
  return [&field, key](const toml::node& n) { field = need<T>(n, key); };
}

Loss loss_from(const std::string& s) {
  if (s == "cross_entropy") return Loss::CrossEntropy;
  if (s == "mse") return Loss::Mse;
  if (s == "binary_cross_entropy") return Loss::BinaryCrossEntropy;
  throw ConfigError("unknown loss '" + s + "'");
}

const char* loss_name(Loss l) {
  switch (l) {
    case Loss::CrossEntropy: return "cross_entropy";
    case Loss::Mse: return "mse";
    case Loss::BinaryCrossEntropy: return "binary_cross_entropy";
  }
  return "?";
}

}  // namespace

prune::BlockShape parse_block_shape(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_r = 0, used_c = 0;
    const std::string rs = text.substr(0, x), cs = text.substr(x + 1);
    auto digits = [](const std::string& t) { return !t.empty() && t.find_first_not_of("0123456789") == std::string::npos; };
    if (!digits(rs) || !digits(cs)) throw std::invalid_argument(text);  // stoul would accept "-1"
    const auto r = std::stoul(rs, &used_r);
    const auto c = std::stoul(cs, &used_c);
    if (used_r != rs.size() || used_c != cs.size() || c == 0) throw std::invalid_argument(text);
    return {r, c};
  } catch (const std::logic_error&) {
    throw ConfigError("block shape must look like RxC (R = 0 for whole columns), got '" + text + "'");
  }
}

PipelineConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ParseError(source + ": " + std::string(e.description()), e.source().begin.line);
  }

  PipelineConfig c;
  std::string optimizer, loss, activation, block;
  std::map<std::string, std::map<std::string, Setter>> keys;
  keys["train"] = {{"epochs", set(c.train.epochs, "train.epochs")},
                   {"learning_rate", set(c.train.learning_rate, "train.learning_rate")},
                   {"batch_size", set(c.train.batch_size, "train.batch_size")},
                   {"patience", set(c.train.patience_epochs, "train.patience")},
                   {"lr_halving_period", set(c.train.lr_halving_period, "train.lr_halving_period")},
                   {"min_learning_rate", set(c.train.min_learning_rate, "train.min_learning_rate")},
                   {"momentum", set(c.train.momentum, "train.momentum")},
                   {"optimizer", set(optimizer, "train.optimizer")},
                   {"loss", set(loss, "train.loss")},
                   {"seed", set(c.train.seed, "train.seed")},
                   {"max_train", set(c.max_train, "train.max_train")}};
  keys["hef"] = {{"poly_degree", set(c.hef.poly_degree, "hef.poly_degree")},
                 {"activation", set(activation, "hef.activation")},
                 {"transfer_epochs", set(c.hef.transfer_epochs, "hef.transfer_epochs")},
                 {"finetune_epochs", set(c.hef.finetune_epochs, "hef.finetune_epochs")},
                 {"transfer_lr", set(c.hef.transfer_lr, "hef.transfer_lr")},
                 {"finetune_lr", set(c.hef.finetune_lr, "hef.finetune_lr")},
                 {"patience", set(c.hef.patience, "hef.patience")},
                 {"coeff_init_scale", set(c.hef.coeff_init_scale, "hef.coeff_init_scale")}};
  keys["prune"] = {{"sparsity", set(c.prune.sparsity, "prune.sparsity")},
                   {"block_shape", set(block, "prune.block_shape")},
                   {"s_i", set(c.prune.s_i, "prune.s_i")},
                   {"steps", set(c.prune.steps, "prune.steps")},
                   {"delta_t", set(c.prune.delta_t, "prune.delta_t")},
                   {"t_0", set(c.prune.t_0, "prune.t_0")},
                   {"epochs", set(c.prune.epochs, "prune.epochs")},
                   {"learning_rate", set(c.prune.learning_rate, "prune.learning_rate")},
                   {"shrink_epochs", set(c.prune.shrink_epochs, "prune.shrink_epochs")},
                   {"shrink_learning_rate", set(c.prune.shrink_learning_rate, "prune.shrink_learning_rate")}};
  keys["crypto"] = {{"pmd", set(c.crypto.pmd, "crypto.pmd")},
                    {"cm_bits", set(c.crypto.cm_bits, "crypto.cm_bits")},
                    {"max_depth", set(c.crypto.max_depth, "crypto.max_depth")},
                    {"slots", set(c.crypto.slot_count, "crypto.slots")},
                    {"limb_bits", set(c.crypto.limb_bits, "crypto.limb_bits")},
                    {"scale_bits", set(c.crypto.scale_bits, "crypto.scale_bits")}};

  for (auto&& [name, node] : root) {
    const std::string section(name.str());
    auto sec = keys.find(section);
    if (sec == keys.end()) throw ConfigError(source + ": unknown section [" + section + "]");
    const toml::table* tbl = node.as_table();
    if (!tbl) throw ConfigError(source + ": " + section + " must be a table");
    for (auto&& [k, v] : *tbl) {
      auto it = sec->second.find(std::string(k.str()));
      if (it == sec->second.end()) throw ConfigError(source + ": unknown key " + section + "." + std::string(k.str()));
      it->second(v);
    }
  }

  if (!optimizer.empty()) {
    if (optimizer == "adam") c.train.optimizer = Optimizer::Adam;
    else if (optimizer == "sgd") c.train.optimizer = Optimizer::SgdMomentum;
    else throw ConfigError("train.optimizer must be adam or sgd");
  }
  if (!loss.empty()) c.train.loss = loss_from(loss);
  c.hef.loss = c.train.loss;
  c.hef.seed = c.train.seed;
  c.hef.batch_size = c.train.batch_size;
  if (!activation.empty()) {
    if (activation == "poly") c.hef.activation_mode = transform::ActivationMode::Poly;
    else if (activation == "square") c.hef.activation_mode = transform::ActivationMode::Square;
    else throw ConfigError("hef.activation must be poly or square");
  }
  if (!block.empty()) c.prune.block = parse_block_shape(block);
  c.train.validate();
  c.hef.validate();
  c.crypto.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"train",
           {{"epochs", train.epochs},
            {"learning_rate", train.learning_rate},
            {"batch_size", train.batch_size},
            {"patience", train.patience_epochs},
            {"optimizer", train.optimizer == Optimizer::Adam ? "adam" : "sgd"},
            {"loss", loss_name(train.loss)},
            {"seed", train.seed},
            {"max_train", max_train}}},
          {"hef",
           {{"poly_degree", hef.poly_degree},
            {"activation", hef.activation_mode == transform::ActivationMode::Poly ? "poly" : "square"},
            {"transfer_epochs", hef.transfer_epochs},
            {"finetune_epochs", hef.finetune_epochs},
            {"transfer_lr", hef.transfer_lr},
            {"finetune_lr", hef.finetune_lr}}},
          {"prune",
           {{"sparsity", prune.sparsity},
            {"block_shape", std::to_string(prune.block.rows) + "x" + std::to_string(prune.block.cols)},
            {"steps", prune.steps},
            {"delta_t", prune.delta_t},
            {"epochs", prune.epochs},
            {"shrink_epochs", prune.shrink_epochs}}},
          {"crypto",
           {{"pmd", crypto.pmd},
            {"cm_bits", crypto.cm_bits},
            {"max_depth", crypto.depth()},
            {"slots", crypto.slots()},
            {"limb_bits", crypto.limb_bits},
            {"scale_bits", crypto.scale_bits}}}};
}

}  // namespace mofhei
