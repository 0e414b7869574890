// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mofhei/hesim.hpp"
#include "mofhei/prune.hpp"
#include "mofhei/train.hpp"
#include "mofhei/transform.hpp"

namespace mofhei {

struct PruneSettings {
  double sparsity = 0.5;
  prune::BlockShape block{0, 1};  // rows == 0: whole columns
  double s_i = 0.0;
  /// Mask updates; 0 derives floor(0.6 * epochs).
  int steps = 0;
  /// Optimizer steps between mask updates; 0 means one epoch.
  std::int64_t delta_t = 0;
  std::int64_t t_0 = 0;
  int epochs = 100;
  double learning_rate = 1e-3;
  int shrink_epochs = 100;
  double shrink_learning_rate = 1e-3;  // shrink fine-tuning belongs to the pruning stage
};

/// Pipeline settings from the [train], [hef], [prune] and [crypto] sections of
/// a TOML file. Unknown keys are rejected.
struct PipelineConfig {
  TrainConfig train;
  /// Use at most this many training instances (0 = all).
  std::size_t max_train = 0;
  transform::HefConfig hef;
  PruneSettings prune;
  he::PackingConfig crypto;

  nlohmann::json to_json() const;
};

/// Throws ParseError for malformed TOML and ConfigError for unknown keys or bad values.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view toml_text, const std::string& source = "<string>");

/// "RxC" -> {R, C}; throws ConfigError.
prune::BlockShape parse_block_shape(const std::string& text);

}  // namespace mofhei
