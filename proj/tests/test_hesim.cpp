// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "mofhei/error.hpp"
#include "mofhei/hesim.hpp"
#include "support.hpp"

using namespace mofhei;
using namespace mofhei::he;

namespace {

PackingConfig small(std::size_t slots, int depth = 4) {
  PackingConfig c;
  c.pmd = 1024;
  c.slot_count = slots;
  c.max_depth = depth;
  c.cm_bits = 2 * c.limb_bits + depth * c.scale_bits;
  return c;
}

}  // namespace

TEST(PackingConfig, DefaultsFromCoefficientModulus) {
  const PackingConfig c = PackingConfig{}.resolved();
  EXPECT_EQ(c.slots(), 16384u);
  EXPECT_EQ(c.depth(), (860 - 120) / 40);
  PackingConfig bad;
  bad.slot_count = 16385;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = PackingConfig{};
  bad.max_depth = 19;  // 120 + 19*40 > 860
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(BatchPack, FeatureMajorLayout) {
  const PackingConfig c = small(4);
  const Tensor x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto cts = batch_pack(x, c);
  ASSERT_EQ(cts.size(), 3u);
  EXPECT_EQ(cts[0].slots(), (std::vector<double>{1, 4, 0, 0}));
  EXPECT_EQ(cts[1].slots(), (std::vector<double>{2, 5, 0, 0}));
  EXPECT_EQ(cts[2].slots(), (std::vector<double>{3, 6, 0, 0}));
  for (const auto& ct : cts) {
    EXPECT_TRUE(ct.is_ciphertext());
    EXPECT_EQ(ct.level(), 4);
  }
  EXPECT_EQ(batch_unpack(cts, 2), x);
}

TEST(BatchPack, SingleInstanceAndCapacity) {
  const PackingConfig c = small(3);
  const auto one = batch_pack(Tensor({1, 2}, std::vector<double>{7, 8}), c);
  EXPECT_EQ(one[1].slots(), (std::vector<double>{8, 0, 0}));
  EXPECT_THROW(batch_pack(Tensor({4, 2}), c), CapacityError);
}

TEST(BatchPack, RoundTripRandom) {
  std::mt19937_64 rng(1);
  const Tensor x = mofhei::testing::random_tensor({17, 9}, rng);
  EXPECT_EQ(batch_unpack(batch_pack(x, small(32)), 17), x);
}

TEST(EncodeScalar, RepeatsValueAndFlagsZero) {
  const auto p = encode_scalar(2.5, small(4));
  EXPECT_EQ(p.slots(), (std::vector<double>{2.5, 2.5, 2.5, 2.5}));
  EXPECT_FALSE(p.is_ciphertext());
  EXPECT_FALSE(p.is_zero());
  EXPECT_TRUE(encode_scalar(0.0, small(4)).is_zero());
}

TEST(SimdOp, AddZeroIsIdentity) {
  const PackingConfig c = small(3);
  OpCounters k;
  const auto x = batch_pack(Tensor({3, 1}, std::vector<double>{1, -2, 3}), c)[0];
  const auto z = batch_pack(Tensor({3, 1}), c)[0];
  const auto y = simd_op(OpKind::CtAdd, x, z, k, c);
  EXPECT_EQ(y.slots(), x.slots());
  EXPECT_EQ(y.level(), x.level());
  EXPECT_EQ(k.ct_add, 1u);
  EXPECT_EQ(k.total(), 1u);
}

TEST(SimdOp, SquareAtLevelOneExhaustsBudget) {
  const PackingConfig c = small(2, 1);
  OpCounters k;
  const auto x = batch_pack(Tensor({2, 1}, std::vector<double>{3, -4}), c)[0];
  const auto y = simd_op(OpKind::CtCtMul, x, x, k, c);
  EXPECT_EQ(y.slots(), (std::vector<double>{9, 16}));
  EXPECT_EQ(y.level(), 0);
  EXPECT_THROW(simd_op(OpKind::CtCtMul, y, y, k, c), DepthBudgetError);
  EXPECT_THROW(simd_op(OpKind::CtPtMul, y, encode_scalar(1.0, c), k, c), DepthBudgetError);
  // Additions still work at level 0.
  EXPECT_NO_THROW(simd_op(OpKind::CtPtAdd, y, encode_scalar(1.0, c), k, c));
}

TEST(SimdOp, MultiplicationChainDropsOneLevelEach) {
  for (int k = 0; k <= 6; ++k) {
    const PackingConfig c = small(2, 6);
    OpCounters cnt;
    auto x = batch_pack(Tensor({2, 1}, std::vector<double>{1, 2}), c)[0];
    for (int i = 0; i < k; ++i) x = simd_op(OpKind::CtPtMul, x, encode_scalar(2.0, c), cnt, c);
    EXPECT_EQ(x.level(), 6 - k);
    EXPECT_EQ(cnt.ct_pt_mul, static_cast<std::uint64_t>(k));
    EXPECT_DOUBLE_EQ(x.slots()[1], 2.0 * std::pow(2.0, k));
  }
}

TEST(SimdOp, OperandKindsChecked) {
  const PackingConfig c = small(2);
  OpCounters k;
  const auto x = batch_pack(Tensor({2, 1}), c)[0];
  const auto p = encode_scalar(1.0, c);
  EXPECT_THROW(simd_op(OpKind::CtAdd, x, p, k, c), Error);
  EXPECT_THROW(simd_op(OpKind::CtPtMul, p, x, k, c), Error);
  EXPECT_THROW(simd_op(OpKind::CtCtMul, x, p, k, c), Error);
}

TEST(SimdOp, ExpressionMatchesPerSlotEvaluation) {
  std::mt19937_64 rng(7);
  const PackingConfig c = small(16, 8);
  const Tensor a = mofhei::testing::random_tensor({16, 1}, rng), b = mofhei::testing::random_tensor({16, 1}, rng);
  OpCounters k;
  const auto ca = batch_pack(a, c)[0], cb = batch_pack(b, c)[0];
  // ((a*b + 0.5) * a) + b*b
  auto e = simd_op(OpKind::CtCtMul, ca, cb, k, c);
  e = simd_op(OpKind::CtPtAdd, e, encode_scalar(0.5, c), k, c);
  e = simd_op(OpKind::CtCtMul, e, ca, k, c);
  e = simd_op(OpKind::CtAdd, e, simd_op(OpKind::CtCtMul, cb, cb, k, c), k, c);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(e.slots()[j], (a[j] * b[j] + 0.5) * a[j] + b[j] * b[j], 1e-12);
  EXPECT_EQ(e.level(), 6);
  EXPECT_EQ(k.ct_ct_mul, 3u);
}

TEST(SimdOp, NoiseHookSeesEveryResult) {
  PackingConfig c = small(2);
  int calls = 0;
  c.noise = [&](OpKind, std::span<double> s) {
    ++calls;
    for (double& v : s) v += 1e-3;
  };
  OpCounters k;
  const auto x = batch_pack(Tensor({2, 1}, std::vector<double>{1, 1}), c)[0];
  const auto y = simd_op(OpKind::CtAdd, x, x, k, c);
  EXPECT_EQ(calls, 1);
  EXPECT_DOUBLE_EQ(y.slots()[0], 2.001);
}

TEST(Memory, FreshCiphertextBytes) {
  PackingConfig c;
  c.max_depth = 13;  // 15 limbs at the top level
  const auto ct = zero_ciphertext(c.resolved(), 13);
  const std::vector<PackedVec> live{ct};
  EXPECT_EQ(c.limbs(13), 15u);
  EXPECT_EQ(memory_snapshot(live, c), 7864320u);
  EXPECT_EQ(memory_snapshot({}, c), 0u);
}

TEST(Counters, MergeSumsAndKeepsPeak) {
  OpCounters a{1, 2, 3, 4, 5, 6, 100}, b{10, 20, 30, 40, 50, 60, 50};
  a.merge(b);
  EXPECT_EQ(a, (OpCounters{11, 22, 33, 44, 55, 66, 100}));
  EXPECT_EQ(a.total(), 110u);
}

TEST(PackedVec, IdsAreUniqueAcrossThreads) {
  std::vector<std::vector<std::uint64_t>> ids(4);
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&, t] {
      for (int i = 0; i < 1000; ++i) ids[t].push_back(PackedVec(VecKind::Plaintext, {1.0}, 0).id());
    });
  for (auto& t : ts) t.join();
  std::set<std::uint64_t> all;
  for (const auto& v : ids) all.insert(v.begin(), v.end());
  EXPECT_EQ(all.size(), 4000u);
}
