// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mofhei/model.hpp"
#include "mofhei/train.hpp"

namespace mofhei::prune {

/// Sparsity ramps from `s_i` at step `t_0` to `s_f` at step `t_0 + n * delta_t`
/// (cubic, steepest at the start), with a mask update every `delta_t` steps.
struct PruningSchedule {
  double s_i = 0.0;
  double s_f = 0.5;
  int n = 1;
  std::int64_t t_0 = 0;
  std::int64_t delta_t = 1;
  /// Training epochs for the whole pruning run.
  int epochs = 100;

  void validate() const;
};

/// Target sparsity at training step t; throws for t < t_0.
double schedule_sparsity(const PruningSchedule& sched, std::int64_t t);

/// Defaults for a run of `epochs` epochs with `steps_per_epoch` steps each:
/// delta_t is one epoch and the ramp spans the first 60% of the epochs.
PruningSchedule default_schedule(double s_f, int epochs, std::int64_t steps_per_epoch);

struct BlockShape {
  std::size_t rows = 1;
  std::size_t cols = 1;
};

/// Binary block grid over a layer's (rows, cols) weight-matrix view (the
/// im2col view for Conv2D); the matrix is treated as zero-padded to a block
/// multiple. 1 keeps a block, 0 prunes it.
struct BlockMask {
  std::size_t layer_index = 0;
  BlockShape block;
  std::size_t rows = 0;  // weight-matrix rows
  std::size_t cols = 0;  // weight-matrix columns
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<std::uint8_t> grid;
  bool frozen = false;

  std::uint8_t at(std::size_t r, std::size_t c) const { return grid[r * grid_cols + c]; }
  std::size_t total_blocks() const { return grid.size(); }
  std::size_t pruned_blocks() const;
  /// Elementwise 0/1 mask shaped like the layer's weights.
  Tensor cell_mask(const Shape& weight_shape) const;
};

struct PruneState {
  PruningSchedule schedule;
  std::vector<BlockMask> masks;
  std::optional<std::int64_t> freeze_step;

  /// Per-layer elementwise masks (empty for unmasked layers), sized to the model.
  WeightMasks cell_masks(const Model& model) const;
  bool frozen() const;

  nlohmann::json to_json() const;
  static PruneState from_json(const nlohmann::json& j);
};

void save_prune_state(const PruneState& state, const std::filesystem::path& path);
PruneState load_prune_state(const std::filesystem::path& path);

/// Dense and Conv2D layers except the output layer.
std::vector<std::size_t> prunable_layers(const Model& model);

/// One all-ones mask per prunable layer. Layers missing from `block_shapes`
/// get (rows, 1) blocks, i.e. whole columns (units, or filters for Conv2D).
std::vector<BlockMask> generate_block_masks(const Model& model,
                                            const std::map<std::size_t, BlockShape>& block_shapes = {});

/// Recomputes each mask from scratch: the floor(s_t * blocks) blocks with the
/// smallest mean |w| (over real, non-padding cells) are pruned, ties broken by
/// (block row, block col); at least one block per layer survives.
std::vector<BlockMask> prune_step(std::vector<BlockMask> masks, const Model& model, double s_t);

struct PruneResult {
  Model model;
  PruneState state;
  TrainHistory history;
};

/// Mask-gated training: prune_step fires every delta_t steps from t_0 for n
/// steps, masked weights are never updated, masks freeze at s_f and early
/// stopping only starts after the freeze. The returned model keeps its dense
/// shapes with masked weights set to zero.
PruneResult iterative_block_prune(Model model, const PruningSchedule& sched, const Dataset& train,
                                  const Dataset& val, const TrainConfig& cfg,
                                  const std::map<std::size_t, BlockShape>& block_shapes = {});

struct ConvDenseShapes {
  std::size_t F = 0, I = 0, J = 0, K = 0, U = 0, V = 0, M = 0, N = 0;
};

/// Filter matrix (M, F): one column per filter, each flattened in (I, J, K) order.
std::pair<Tensor, ConvDenseShapes> conv_to_dense_view(const LayerSpec& conv);
/// Volume chunks of one input (H, W, K) as an (N, M) matrix, rows in (U, V) order.
Tensor im2col(const Tensor& input, const LayerSpec& conv);

/// Deletes all-zero columns (units/filters) of every masked layer and the
/// matching input rows of the next Dense/Conv2D layer. The constant output a
/// removed unit would have produced is folded into the next layer's bias, so
/// the result computes the same function as the masked model (exactly when the
/// next layer is Dense or an unpadded Conv2D).
Model shrink_structure(const Model& model, const PruneState& state);

/// shrink_structure followed by one fine-tuning run with `cfg`.
Model shrink(const Model& model, const PruneState& state, const Dataset& train, const Dataset& val,
             const TrainConfig& cfg);

struct LayerSparsity {
  std::size_t layer_index = 0;  // in the original model
  LayerKind kind = LayerKind::Dense;
  std::size_t units_before = 0;
  std::size_t units_after = 0;
  std::size_t params_before = 0;
  std::size_t params_after = 0;
  double sparsity = 0.0;       // 1 - params_after / params_before
  double unit_sparsity = 0.0;  // 1 - units_after / units_before
};

struct SparsityReport {
  std::vector<LayerSparsity> per_layer;  // prunable layers only
  double overall = 0.0;
  nlohmann::json to_json() const;
};

/// Compares two models with the same layer sequence (the second typically shrunk).
SparsityReport sparsity_report(const Model& original, const Model& shrunk);

}  // namespace mofhei::prune
