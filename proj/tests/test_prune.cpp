// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mofhei/datasets.hpp"
#include "mofhei/error.hpp"
#include "mofhei/nn.hpp"
#include "mofhei/prune.hpp"
#include "mofhei/zoo.hpp"
#include "support.hpp"

using namespace mofhei;
using namespace mofhei::prune;
using mofhei::testing::random_tensor;

namespace {

Model dense_with(const std::vector<double>& w, std::size_t rows, std::size_t cols) {
  Model m({rows});
  m.add(LayerSpec::dense(cols)).add(LayerSpec::square()).add(LayerSpec::dense(1));
  m.initialize(1);
  m.layer(0).weights = Tensor({rows, cols}, w);
  return m;
}

std::vector<int> grid_of(const BlockMask& m) { return {m.grid.begin(), m.grid.end()}; }

}  // namespace

TEST(Schedule, EndpointsAndMidpoint) {
  PruningSchedule s;
  s.s_i = 0.0;
  s.s_f = 0.9;
  s.n = 4;
  s.delta_t = 10;
  s.t_0 = 5;
  EXPECT_DOUBLE_EQ(schedule_sparsity(s, 5), 0.0);
  EXPECT_DOUBLE_EQ(schedule_sparsity(s, 45), 0.9);
  EXPECT_DOUBLE_EQ(schedule_sparsity(s, 25), 0.9 * (1.0 - 0.125));
  EXPECT_DOUBLE_EQ(schedule_sparsity(s, 1000), 0.9);
  EXPECT_THROW(schedule_sparsity(s, 4), Error);
  double prev = 0;
  for (std::int64_t t = 5; t <= 60; ++t) {
    const double v = schedule_sparsity(s, t);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Schedule, Validation) {
  PruningSchedule s;
  s.s_f = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.s_f = 0.5;
  s.n = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.n = 1;
  s.delta_t = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Schedule, DefaultsSpanSixtyPercentOfEpochs) {
  const PruningSchedule s = default_schedule(0.5, 100, 134);
  EXPECT_EQ(s.n, 60);
  EXPECT_EQ(s.delta_t, 134);
  EXPECT_EQ(s.t_0, 0);
}

TEST(BlockMasks, DenseColumnDefaultsAndPaddedGrid) {
  Model m = zoo::lenet();
  const auto masks = generate_block_masks(m);
  ASSERT_EQ(masks.size(), 4u);  // output layer excluded
  EXPECT_EQ(masks[3].layer_index, 9u);
  EXPECT_EQ(masks[3].grid_rows, 1u);
  EXPECT_EQ(masks[3].grid_cols, 84u);
  EXPECT_EQ(masks[0].block.rows, 25u);  // 5*5*1 filter column

  Model d = dense_with(std::vector<double>(35, 1.0), 5, 7);
  const auto pm = generate_block_masks(d, {{0, {2, 3}}});
  EXPECT_EQ(pm[0].grid_rows, 3u);
  EXPECT_EQ(pm[0].grid_cols, 3u);
}

TEST(PruneStep, HandOracleOverBlockMeans) {
  Model m = dense_with({0.1, -0.5, 0.02, 0.9, -0.2, 0.4, 0.01, -0.8}, 2, 4);
  auto masks = generate_block_masks(m, {{0, {2, 1}}});
  masks = prune_step(masks, m, 0.5);
  EXPECT_EQ(grid_of(masks[0]), (std::vector<int>{0, 1, 0, 1}));
  masks = prune_step(masks, m, 0.0);
  EXPECT_EQ(grid_of(masks[0]), (std::vector<int>{1, 1, 1, 1}));
}

TEST(PruneStep, TiesBrokenByCoordinates) {
  Model m = dense_with(std::vector<double>(8, 0.3), 2, 4);
  auto masks = prune_step(generate_block_masks(m, {{0, {2, 1}}}), m, 0.5);
  EXPECT_EQ(grid_of(masks[0]), (std::vector<int>{0, 0, 1, 1}));
}

TEST(PruneStep, CountsAreFloorAndOneSurvives) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng() % 9, cols = 1 + rng() % 12;
    Model m = dense_with(random_tensor({rows * cols}, rng).vec(), rows, cols);
    const std::size_t br = 1 + rng() % rows, bc = 1 + rng() % 3;
    const double s = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    const auto masks = prune_step(generate_block_masks(m, {{0, {br, bc}}}), m, s);
    const std::size_t total = masks[0].total_blocks();
    const auto want = std::min(total - 1, static_cast<std::size_t>(std::floor(s * static_cast<double>(total) + 1e-9)));
    EXPECT_EQ(masks[0].pruned_blocks(), want);
  }
}

TEST(PruneStep, FrozenMaskRejected) {
  Model m = dense_with(std::vector<double>(4, 1.0), 2, 2);
  auto masks = generate_block_masks(m);
  masks[0].frozen = true;
  EXPECT_THROW(prune_step(masks, m, 0.5), Error);
}

TEST(IterativePrune, FreezesAtTargetAndNeverTouchesMaskedWeights) {
  const data::Splits s = data::split(data::synthetic(data::Synthetic::Blobs, 400, 3), 300, 50, 50, 3);
  Model m({2});
  m.add(LayerSpec::dense(20)).add(LayerSpec::square()).add(LayerSpec::dense(10)).add(LayerSpec::square());
  m.add(LayerSpec::dense(3));
  m.initialize(5);
  TrainConfig cfg;
  cfg.batch_size = 30;
  PruningSchedule sched = default_schedule(0.6, 6, 10);
  sched.n = 3;

  const PruneResult r = iterative_block_prune(m, sched, s.train, s.val, cfg);
  ASSERT_TRUE(r.state.frozen());
  EXPECT_EQ(*r.state.freeze_step, sched.t_0 + sched.n * sched.delta_t);
  for (const BlockMask& bm : r.state.masks) {
    EXPECT_EQ(bm.pruned_blocks(), static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(bm.total_blocks()) + 1e-9)));
    const Tensor cell = bm.cell_mask(r.model.layer(bm.layer_index).weights.shape());
    for (std::size_t k = 0; k < cell.size(); ++k) {
      if (cell[k] == 0.0) {
        EXPECT_EQ(r.model.layer(bm.layer_index).weights[k], 0.0);
      }
    }
  }
}

TEST(IterativePrune, MaskedCellsAreNeverUpdated) {
  const data::Splits s = data::split(data::synthetic(data::Synthetic::Blobs, 300, 3), 200, 50, 50, 3);
  Model m({2});
  m.add(LayerSpec::dense(12)).add(LayerSpec::square()).add(LayerSpec::dense(3));
  m.initialize(5);
  PruneState st;
  st.masks = prune_step(generate_block_masks(m), m, 0.5);
  const WeightMasks cells = st.cell_masks(m);
  const Tensor before = m.layer(0).weights;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 20;
  TrainHooks hooks;
  hooks.masks = &cells;
  train(m, s.train, s.val, cfg, hooks);
  std::size_t masked = 0, moved = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (cells[0][k] == 0.0) {
      EXPECT_EQ(m.layer(0).weights[k], before[k]);
      ++masked;
    } else {
      moved += m.layer(0).weights[k] != before[k];
    }
  }
  EXPECT_EQ(masked, 12u);
  EXPECT_GT(moved, 0u);
}

TEST(IterativePrune, ZeroTargetPrunesNothing) {
  const data::Splits s = data::split(data::synthetic(data::Synthetic::Blobs, 120, 3), 80, 20, 20, 3);
  Model m({2});
  m.add(LayerSpec::dense(6)).add(LayerSpec::square()).add(LayerSpec::dense(3));
  m.initialize(5);
  TrainConfig cfg;
  PruningSchedule sched;
  sched.s_f = 0.0;
  sched.n = 1;
  sched.epochs = 2;
  const PruneResult r = iterative_block_prune(m, sched, s.train, s.val, cfg);
  EXPECT_EQ(r.state.masks[0].pruned_blocks(), 0u);
}

TEST(ConvDense, SmallInputShapes) {
  Model m({3, 3, 4});
  m.add(LayerSpec::conv2d(3, {2, 2}));
  m.initialize(1);
  const auto [w, s] = conv_to_dense_view(m.layer(0));
  EXPECT_EQ(s.M, 16u);
  EXPECT_EQ(s.N, 4u);
  EXPECT_EQ(w.shape(), (Shape{16, 3}));
}

TEST(ConvDense, MatchesDirectConvolution) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 2 + rng() % 7, w = 2 + rng() % 7, k = 1 + rng() % 3;
    const std::size_t ki = 1 + rng() % 3, kj = 1 + rng() % 3, st = 1 + rng() % 2;
    const Padding pad = rng() % 2 ? Padding::Same : Padding::Valid;
    if (pad == Padding::Valid && (ki > h || kj > w)) continue;
    Model m({h, w, k});
    m.add(LayerSpec::conv2d(1 + rng() % 4, {ki, kj}, {st, st}, pad));
    m.initialize(rng());
    m.layer(0).bias = random_tensor({m.layer(0).filters}, rng);
    const Tensor x = random_tensor({h, w, k}, rng);
    const auto [wbar, s] = conv_to_dense_view(m.layer(0));
    const Tensor xbar = im2col(x, m.layer(0));
    ASSERT_EQ(xbar.shape(), (Shape{s.N, s.M}));
    Tensor y({s.U, s.V, s.F});
    for (std::size_t n = 0; n < s.N; ++n)
      for (std::size_t f = 0; f < s.F; ++f) {
        double acc = m.layer(0).bias[f];
        for (std::size_t r = 0; r < s.M; ++r) acc += xbar[n * s.M + r] * wbar[r * s.F + f];
        y[n * s.F + f] = acc;
      }
    EXPECT_LE(max_abs_diff(y, nn::layer_forward(m.layer(0), x)), 1e-12);
  }
}

TEST(Shrink, AllOnesMaskIsStructuralNoop) {
  Model m = zoo::lenet({3, 4, 6, 5}, zoo::Act::Square, true, 2);
  PruneState st;
  st.masks = generate_block_masks(m);
  for (auto& bm : st.masks) bm.frozen = true;
  const Model s = shrink_structure(m, st);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(s.layer(i).weights.shape(), m.layer(i).weights.shape());
}

TEST(Shrink, ShrunkForwardEqualsMaskedForward) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Model m = zoo::lenet({4, 6, 10, 8}, trial % 2 ? zoo::Act::Square : zoo::Act::Poly2, true, rng());
    for (auto& l : m.layers())
      if (l.has_weights()) l.bias = random_tensor(l.bias.shape(), rng, -0.2, 0.2);
    PruneState st;
    st.masks = prune_step(generate_block_masks(m), m, 0.5);
    for (auto& bm : st.masks) bm.frozen = true;
    const Tensor x = random_tensor({3, 28, 28, 1}, rng, 0.0, 1.0);
    const Tensor masked = m.predict(x, st.cell_masks(m));
    const Model s = shrink_structure(m, st);
    EXPECT_EQ(s.layer(0).filters, 2u);
    EXPECT_EQ(s.layer(3).filters, 3u);
    EXPECT_EQ(s.layer(6).filters, 5u);
    EXPECT_EQ(s.layer(9).units, 4u);
    EXPECT_EQ(s.layer(11).units, 10u);
    EXPECT_LE(max_abs_diff(s.predict(x), masked), 1e-9);
  }
}

TEST(Shrink, FlattenRowsFollowChannelLastLayout) {
  // Conv with 3 filters on a 2x2 output, flattened into a dense layer: removing
  // filter 1 must drop dense rows {1, 4, 7, 10}.
  Model m({3, 3, 1});
  m.add(LayerSpec::conv2d(3, {2, 2})).add(LayerSpec::square()).add(LayerSpec::flatten()).add(LayerSpec::dense(2));
  m.add(LayerSpec::square()).add(LayerSpec::dense(1));
  m.initialize(3);
  Tensor& w = m.layer(0).weights;
  for (std::size_t r = 0; r < 4; ++r) w[r * 3 + 1] = 0.0;
  Tensor& next = m.layer(3).weights;
  for (std::size_t r = 0; r < 12; ++r) next[r * 2] = static_cast<double>(r);
  PruneState st;
  st.masks = generate_block_masks(m);
  for (auto& bm : st.masks) bm.frozen = true;
  const Model s = shrink_structure(m, st);
  ASSERT_EQ(s.layer(3).weights.shape(), (Shape{8, 2}));
  const std::vector<double> want{0, 2, 3, 5, 6, 8, 9, 11};
  for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(s.layer(3).weights[r * 2], want[r]);
}

TEST(SparsityReport, OverallAtLeastLayerwise) {
  Model m = zoo::lenet({6, 16, 120, 84}, zoo::Act::Poly2, true, 1);
  PruneState st;
  st.masks = prune_step(generate_block_masks(m), m, 0.5);
  for (auto& bm : st.masks) bm.frozen = true;
  const Model s = shrink_structure(m, st);
  const SparsityReport r = sparsity_report(m, s);
  EXPECT_GE(r.overall, 0.5);
  EXPECT_NEAR(r.overall, 0.73, 0.03);
  ASSERT_EQ(r.per_layer.size(), 4u);
  EXPECT_EQ(r.per_layer[3].units_after, 42u);
  EXPECT_DOUBLE_EQ(sparsity_report(m, m).overall, 0.0);
}

TEST(PruneStateIo, JsonRoundTrip) {
  Model m = zoo::fcnet({8, 6, 4}, zoo::Act::Square, 1);
  PruneState st;
  st.schedule = default_schedule(0.8, 10, 5);
  st.masks = prune_step(generate_block_masks(m, {{2, {3, 2}}}), m, 0.8);
  st.freeze_step = 30;
  const auto path = std::filesystem::temp_directory_path() / "mofhei_prune_state.json";
  save_prune_state(st, path);
  const PruneState back = load_prune_state(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.masks.size(), st.masks.size());
  for (std::size_t i = 0; i < st.masks.size(); ++i) {
    EXPECT_EQ(back.masks[i].grid, st.masks[i].grid);
    EXPECT_EQ(back.masks[i].block.rows, st.masks[i].block.rows);
  }
  EXPECT_EQ(back.freeze_step, st.freeze_step);
  EXPECT_EQ(back.schedule.n, st.schedule.n);
}
