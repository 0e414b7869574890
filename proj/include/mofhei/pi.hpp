// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mofhei/hesim.hpp"
#include "mofhei/model.hpp"

namespace mofhei::pi {

/// Input index standing for a padding position (read from a shared zero ciphertext).
inline constexpr std::uint32_t kPadding = std::numeric_limits<std::uint32_t>::max();

/// One output ciphertext of a Dense/Conv2D (dot product + bias) or AvgPool2D
/// (sum, then scale) layer. Zero weights are dropped at compile time and
/// recorded in the skip counts.
struct Task {
  std::vector<std::uint32_t> inputs;
  std::vector<double> weights;  // empty for pooling
  double bias = 0.0;
  std::uint32_t skipped_mul = 0;
  std::uint32_t skipped_add = 0;
  /// Every weight was zero: the output is just the bias on a zero ciphertext.
  bool skipped = false;
};

struct LayerProgram {
  std::size_t layer_index = 0;
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;
  std::size_t in_count = 0;
  std::size_t out_count = 0;
  int in_level = 0;
  int out_level = 0;
  bool uses_padding = false;
  std::vector<Task> tasks;      // Dense, Conv2D, AvgPool2D
  std::vector<double> coeffs;   // PolyAct, lowest power first
  double pool_scale = 1.0;      // AvgPool2D
};

struct PiProgram {
  Shape input_shape;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<LayerProgram> layers;
  int depth = 0;
  /// The model ends in Softmax; applied to the decrypted outputs by the client.
  bool client_softmax = false;
  he::PackingConfig cfg;
};

/// Throws Error for models that are not HE-friendly and DepthBudgetError when
/// the program needs more levels than cfg allows.
PiProgram compile(const Model& model, const he::PackingConfig& cfg);

struct LayerCost {
  std::size_t layer_index = 0;
  std::string kind;
  std::size_t units = 0;    // units, filters, or channels for shape-preserving layers
  std::size_t outputs = 0;  // output ciphertexts
  /// Full op counts (skipped ops included) plus the skip counts and the live
  /// ciphertext bytes while the layer runs.
  he::OpCounters ops;
  int depth = 0;  // levels consumed
  std::uint64_t total() const { return ops.total(); }
  std::uint64_t executed() const { return ops.total() - ops.skipped(); }
};

struct CostReport {
  std::vector<LayerCost> per_layer;
  he::OpCounters totals;
  int static_depth = 0;
  int max_depth = 0;
  std::uint64_t peak_memory_bytes = 0;
  /// Filled by infer.
  std::optional<he::OpCounters> executed;
  std::optional<double> wall_seconds;
  std::size_t batch = 0;

  bool depth_ok() const { return static_depth <= max_depth; }
  nlohmann::json to_json() const;
  /// One row per layer with units and op counts, then a total row.
  std::string to_csv() const;
};

/// Closed-form op counts, depth and peak memory without building a program.
/// Never throws for depth; check depth_ok().
CostReport analyze_cost(const Model& model, const he::PackingConfig& cfg);

struct ExecResult {
  std::vector<he::PackedVec> outputs;
  he::OpCounters counters;
  std::vector<he::OpCounters> per_layer;
};

/// Runs the program on batch-packed inputs, splitting each layer's output
/// tasks over `workers` threads.
ExecResult execute(const PiProgram& program, const std::vector<he::PackedVec>& input, int workers);

struct InferResult {
  Tensor predictions;
  CostReport report;
};

/// Packs `batch` in chunks of at most cfg.slots() instances, runs the program on
/// each chunk and unpacks. Simulated ciphertexts only carry as many slots as the
/// chunk has instances; unused slots are all-zero and do not change any result.
InferResult infer(const Model& model, const Tensor& batch, const he::PackingConfig& cfg, int workers);

}  // namespace mofhei::pi
