// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mofhei/train.hpp"

namespace mofhei::data {

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Reads an IDX image/label file pair (plain or gzip-compressed). Images become
/// (n, 28, 28, 1) scaled by 1/255, labels one-hot over 10 classes. Throws
/// ParseError with the offending byte offset (in the decompressed stream).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Directory from MOFHEI_DATA_DIR, if set.
std::optional<std::filesystem::path> data_dir();

/// MNIST with the standard 60K/10K files under `dir` or `dir`/mnist (split 57K/3K/10K), or the
/// 10K subset under `dir`/mnist10k (split 8500/500/1000). Seeded shuffle before
/// the train/val split.
std::optional<Splits> find_mnist(const std::filesystem::path& dir, std::uint64_t seed = 7);

/// Shuffles with `seed`, then takes the first `n_train` rows as train, the next
/// `n_val` as validation and (if n_test > 0) the next `n_test` as test.
Splits split(const Dataset& all, std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t seed);

/// Flattened images as both input and target, for autoencoders.
Dataset as_autoencoder(const Dataset& images);

/// Grid-stability CSV with header columns tau1..tau4, p1..p4, g1..g4, stab,
/// stabf. Returns the 12 predictors min-max scaled to [0, 1] using the
/// training split only, and one-hot labels (column 0 = unstable, 1 = stable).
/// The split is 8550/450/rest after a seeded shuffle (train/val scaled down
/// proportionally for files with other than 10,000 rows).
Splits load_egss_csv(const std::filesystem::path& path, std::uint64_t seed = 7);

struct MinMaxScaler {
  std::vector<double> lo, hi;
  static MinMaxScaler fit(const Tensor& x);
  /// Constant columns map to 0.
  Tensor apply(const Tensor& x) const;
};

enum class Synthetic { Xor, Linear, Blobs, MnistLike };
std::optional<Synthetic> synthetic_from_string(const std::string& s);

/// Deterministic generators:
///   Xor        x cycles over {0,1}^2, y = x0 xor x1 (single column)
///   Linear     x ~ U(-1, 1), y = 2x + 1 + noise * N(0, 1)
///   Blobs      3 Gaussian clusters in 2-D (sd 0.3) around fixed centres, one-hot y
///   MnistLike  28x28x1 images of 10 fixed stroke prototypes, shifted by up to
///              2 pixels plus N(0, 0.1) noise, clipped to [0, 1]; one-hot y
Dataset synthetic(Synthetic kind, std::size_t n, std::uint64_t seed, double noise = 0.0);

}  // namespace mofhei::data
