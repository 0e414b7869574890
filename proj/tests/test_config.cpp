// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "mofhei/config.hpp"
#include "mofhei/error.hpp"

using namespace mofhei;

TEST(Config, ParsesAllSections) {
  const auto c = parse_config(R"(
[train]
epochs = 7
learning_rate = 0.01
optimizer = "sgd"
seed = 99

[hef]
poly_degree = 3
activation = "square"

[prune]
sparsity = 0.75
block_shape = "4x2"
steps = 5
delta_t = 20

[crypto]
pmd = 16384
cm_bits = 440
max_depth = 8
slots = 100
)");
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.optimizer, Optimizer::SgdMomentum);
  EXPECT_EQ(c.hef.seed, 99u);
  EXPECT_EQ(c.hef.poly_degree, 3);
  EXPECT_EQ(c.hef.activation_mode, transform::ActivationMode::Square);
  EXPECT_DOUBLE_EQ(c.prune.sparsity, 0.75);
  EXPECT_EQ(c.prune.block.rows, 4u);
  EXPECT_EQ(c.prune.block.cols, 2u);
  EXPECT_EQ(c.prune.steps, 5);
  EXPECT_EQ(c.prune.delta_t, 20);
  EXPECT_EQ(c.crypto.pmd, 16384u);
  EXPECT_EQ(c.crypto.depth(), 8);
  EXPECT_EQ(c.crypto.slots(), 100u);
  EXPECT_EQ(c.to_json()["crypto"]["max_depth"].get<int>(), 8);
}

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(c.crypto.resolved().depth(), 18);
  EXPECT_EQ(c.crypto.slots(), 16384u);
}

TEST(Config, UnknownKeysAndSectionsRejected) {
  EXPECT_THROW(parse_config("[train]\nepoch = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nepochs = \"many\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nepochs = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[hef]\nactivation = \"relu\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[crypto]\nmax_depth = 30\n"), ConfigError);
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_config("[train]\nepochs = 3\nlearning_rate = = 1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/mofhei.toml"), ConfigError);
}

TEST(BlockShape, Parsing) {
  const auto b = parse_block_shape("25x1");
  EXPECT_EQ(b.rows, 25u);
  EXPECT_EQ(b.cols, 1u);
  EXPECT_EQ(parse_block_shape("0X3").rows, 0u);
  for (const char* bad : {"", "4", "x2", "4x", "4x0", "4x2x1", "ax2", "-1x2"})
    EXPECT_THROW(parse_block_shape(bad), ConfigError) << bad;
}
