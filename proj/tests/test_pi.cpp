// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "mofhei/error.hpp"
#include "mofhei/pi.hpp"
#include "support.hpp"

using namespace mofhei;
using namespace mofhei::pi;
using mofhei::testing::random_he_model;
using mofhei::testing::random_tensor;

namespace {

he::PackingConfig sim(std::size_t slots = 64) {
  he::PackingConfig c;
  c.pmd = 2 * slots;
  return c;
}

// Direct count of nonzero weights per output column, the oracle for skipping.
std::uint64_t nonzero_weights(const LayerSpec& l) {
  std::uint64_t n = 0;
  for (double v : l.weights.values()) n += v != 0.0;
  return n;
}

}  // namespace

TEST(AnalyzeCost, DenseLayerCount) {
  Model m({120});
  m.add(LayerSpec::dense(84)).add(LayerSpec::square()).add(LayerSpec::dense(10));
  m.initialize(1);
  const CostReport r = analyze_cost(m, sim());
  ASSERT_EQ(r.per_layer.size(), 3u);
  const auto& d = r.per_layer[0].ops;
  EXPECT_EQ(r.per_layer[0].total(), 20160u);
  EXPECT_EQ(d.ct_pt_mul, 120u * 84u);
  EXPECT_EQ(d.ct_add, 119u * 84u);
  EXPECT_EQ(d.ct_pt_add, 84u);
  EXPECT_EQ(r.per_layer[1].ops.ct_ct_mul, 84u);
  EXPECT_EQ(r.per_layer[1].total(), 84u);
  EXPECT_EQ(r.static_depth, 3);
}

TEST(AnalyzeCost, ConvLayerCountIncludesPadding) {
  Model m({28, 28, 1});
  m.add(LayerSpec::conv2d(6, {5, 5}, {1, 1}, Padding::Same)).add(LayerSpec::square());
  m.add(LayerSpec::flatten()).add(LayerSpec::dense(2));
  m.initialize(2);
  const CostReport r = analyze_cost(m, sim());
  EXPECT_EQ(r.per_layer[0].total(), 235200u);
  EXPECT_EQ(r.per_layer[0].outputs, 28u * 28u * 6u);
  EXPECT_EQ(r.per_layer[2].total(), 0u);  // flatten is free
}

TEST(AnalyzeCost, PolyAndPoolCounts) {
  Model m({4, 4, 2});
  m.add(LayerSpec::avg_pool({2, 2}, {2, 2})).add(LayerSpec::poly(2)).add(LayerSpec::flatten()).add(LayerSpec::dense(1));
  m.initialize(1);
  const CostReport r = analyze_cost(m, sim());
  // 8 outputs, each 3 adds and 1 scale.
  EXPECT_EQ(r.per_layer[0].ops.ct_add, 24u);
  EXPECT_EQ(r.per_layer[0].ops.ct_pt_mul, 8u);
  EXPECT_EQ(r.per_layer[0].depth, 1);
  // degree 2: 1 ct-ct mul, 2 ct-pt mul, 1 add, 1 bias
  EXPECT_EQ(r.per_layer[1].total(), 8u * 5u);
  EXPECT_EQ(r.per_layer[1].ops.ct_ct_mul, 8u);
  EXPECT_EQ(r.per_layer[1].depth, 2);
}

TEST(AnalyzeCost, AllZeroDenseExecutesOnlyBiasAdds) {
  Model m({6});
  m.add(LayerSpec::dense(5)).add(LayerSpec::square()).add(LayerSpec::dense(2));
  m.initialize(1);
  m.layer(0).weights.fill(0.0);
  const CostReport r = analyze_cost(m, sim());
  const LayerCost& d = r.per_layer[0];
  EXPECT_EQ(d.total(), 5u * 12u);
  EXPECT_EQ(d.ops.skipped_mul, 30u);
  EXPECT_EQ(d.ops.skipped_add, 25u);
  EXPECT_EQ(d.executed(), 5u);
}

TEST(AnalyzeCost, SkipsMatchNonzeroWeights) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    Model m({9});
    m.add(LayerSpec::dense(7)).add(LayerSpec::square()).add(LayerSpec::dense(3));
    m.initialize(rng());
    mofhei::testing::zero_random_columns(m, rng, 0.5);
    std::bernoulli_distribution drop(0.2);
    for (double& v : m.layer(0).weights.values())
      if (drop(rng)) v = 0.0;
    const CostReport r = analyze_cost(m, sim());
    const LayerSpec& l = m.layer(0);
    std::uint64_t want_add = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      std::uint64_t nz = 0;
      for (std::size_t k = 0; k < 9; ++k) nz += l.weights[k * 7 + c] != 0.0;
      want_add += nz == 0 ? 0 : nz - 1;
    }
    EXPECT_EQ(r.per_layer[0].ops.ct_pt_mul - r.per_layer[0].ops.skipped_mul, nonzero_weights(l));
    EXPECT_EQ(r.per_layer[0].ops.ct_add - r.per_layer[0].ops.skipped_add, want_add);
  }
}

TEST(AnalyzeCost, DepthOverBudgetIsReportedNotThrown) {
  Model m({3});
  m.add(LayerSpec::dense(3)).add(LayerSpec::poly(3)).add(LayerSpec::dense(3)).add(LayerSpec::poly(3)).add(LayerSpec::dense(1));
  m.initialize(1);
  he::PackingConfig c = sim();
  c.max_depth = 4;
  const CostReport r = analyze_cost(m, c);
  EXPECT_EQ(r.static_depth, 1 + 3 + 1 + 3 + 1);
  EXPECT_FALSE(r.depth_ok());
  EXPECT_THROW(compile(m, c), DepthBudgetError);
  EXPECT_THROW(infer(m, Tensor({1, 3}), c, 1), DepthBudgetError);
}

TEST(AnalyzeCost, RejectsNonFriendlyModel) {
  Model m({3});
  m.add(LayerSpec::dense(3)).add(LayerSpec::relu()).add(LayerSpec::dense(1));
  m.initialize(1);
  EXPECT_THROW(compile(m, sim()), Error);
}

TEST(Execute, StaticCountEqualsExecutedPlusSkipped) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Model m = random_he_model(rng);
    if (trial % 2) mofhei::testing::zero_random_columns(m, rng, 0.4);
    const he::PackingConfig c = sim(8);
    const CostReport stat = analyze_cost(m, c);
    Shape s = m.input_shape();
    s.insert(s.begin(), 5);
    const InferResult r = infer(m, random_tensor(s, rng), c, 2);
    ASSERT_TRUE(r.report.executed.has_value());
    const he::OpCounters& e = *r.report.executed;
    EXPECT_EQ(e.total(), stat.totals.total() - stat.totals.skipped()) << "trial " << trial;
    EXPECT_EQ(e.skipped(), stat.totals.skipped());
    EXPECT_EQ(e.ct_ct_mul, stat.totals.ct_ct_mul);
  }
}

TEST(Execute, MatchesPlaintextForward) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    const Model m = random_he_model(rng);
    Shape s = m.input_shape();
    s.insert(s.begin(), 13);
    const Tensor x = random_tensor(s, rng);
    const InferResult r = infer(m, x, sim(8), 3);  // two chunks of 8 slots
    EXPECT_LE(max_abs_diff(r.predictions, m.predict(x)), 1e-9) << "trial " << trial;
  }
}

TEST(Execute, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(13);
  const Model m = random_he_model(rng);
  Shape s = m.input_shape();
  s.insert(s.begin(), 10);
  const Tensor x = random_tensor(s, rng);
  const InferResult a = infer(m, x, sim(), 1), b = infer(m, x, sim(), 8);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(*a.report.executed, *b.report.executed);
}

TEST(Execute, IdentityModelReturnsInputs) {
  Model m({4});
  m.add(LayerSpec::dense(4));
  m.initialize(1);
  m.layer(0).weights.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i) m.layer(0).weights[i * 4 + i] = 1.0;
  m.layer(0).bias.fill(0.0);
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({6, 4}, rng);
  const InferResult r = infer(m, x, sim(), 2);
  EXPECT_EQ(r.predictions, x);
  // Off-diagonal zeros are skipped.
  EXPECT_EQ(r.report.executed->ct_pt_mul, 4u);
  EXPECT_EQ(r.report.executed->ct_add, 0u);
}

TEST(Execute, SoftmaxRunsOnClient) {
  Model m({3});
  m.add(LayerSpec::dense(4)).add(LayerSpec::square()).add(LayerSpec::dense(3)).add(LayerSpec::softmax());
  m.initialize(5);
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({4, 3}, rng);
  const InferResult r = infer(m, x, sim(), 1);
  EXPECT_LE(max_abs_diff(r.predictions, m.predict(x)), 1e-12);
  EXPECT_EQ(r.report.per_layer.back().total(), 0u);
}

TEST(Execute, LevelsDropAsPredicted) {
  Model m({2});
  m.add(LayerSpec::dense(2)).add(LayerSpec::poly(3)).add(LayerSpec::dense(1));
  m.initialize(1);
  const PiProgram p = compile(m, sim());
  ASSERT_EQ(p.layers.size(), 3u);
  EXPECT_EQ(p.layers[0].in_level - p.layers[0].out_level, 1);
  EXPECT_EQ(p.layers[1].in_level - p.layers[1].out_level, 3);
  const auto cts = he::batch_pack(Tensor({1, 2}, std::vector<double>{0.5, -1}), p.cfg);
  const ExecResult e = execute(p, cts, 1);
  EXPECT_EQ(e.outputs[0].level(), p.cfg.depth() - 5);
}

TEST(CostReport, MemoryRatioUsesCiphertextSizes) {
  Model m({8});
  m.add(LayerSpec::dense(4)).add(LayerSpec::square()).add(LayerSpec::dense(2));
  m.initialize(1);
  const he::PackingConfig c = sim();
  const CostReport r = analyze_cost(m, c);
  const int top = c.resolved().depth();
  const std::uint64_t dense0 = 8 * c.ciphertext_bytes(top) + 4 * c.ciphertext_bytes(top - 1);
  EXPECT_EQ(r.per_layer[0].ops.peak_live_bytes, dense0);
  EXPECT_EQ(r.peak_memory_bytes, dense0);
}

TEST(CostReport, JsonAndCsvShape) {
  Model m({3});
  m.add(LayerSpec::dense(2)).add(LayerSpec::square()).add(LayerSpec::dense(1));
  m.initialize(1);
  const CostReport r = analyze_cost(m, sim());
  const auto j = r.to_json();
  EXPECT_EQ(j["layers"].size(), 3u);
  EXPECT_EQ(j["totals"]["ct_pt_mul"].get<std::uint64_t>(), r.totals.ct_pt_mul);
  EXPECT_TRUE(j["depth_ok"].get<bool>());
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("layer,kind,units,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
