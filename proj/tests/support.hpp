// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <random>

#include "mofhei/model.hpp"
#include "mofhei/tensor.hpp"

namespace mofhei::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

// Six nested loops over (u, v, f, i, j, k) with explicit zero padding.
inline Tensor conv_oracle(const LayerSpec& l, const Tensor& x) {
  const std::size_t h = l.input_shape[0], w = l.input_shape[1], kk = l.input_shape[2];
  const std::size_t un = l.output_shape[0], vn = l.output_shape[1], f = l.filters;
  const std::size_t ki = l.kernel[0], kj = l.kernel[1];
  std::size_t pt = 0, pl = 0;
  if (l.padding == Padding::Same) {
    const std::size_t th = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((un - 1) * l.stride[0] + ki) - static_cast<std::ptrdiff_t>(h));
    const std::size_t tw = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((vn - 1) * l.stride[1] + kj) - static_cast<std::ptrdiff_t>(w));
    pt = th / 2;
    pl = tw / 2;
  }
  Tensor y({un, vn, f});
  for (std::size_t u = 0; u < un; ++u)
    for (std::size_t v = 0; v < vn; ++v)
      for (std::size_t q = 0; q < f; ++q) {
        double acc = l.bias[q];
        for (std::size_t i = 0; i < ki; ++i)
          for (std::size_t j = 0; j < kj; ++j)
            for (std::size_t c = 0; c < kk; ++c) {
              const auto r = static_cast<std::ptrdiff_t>(u * l.stride[0] + i) - static_cast<std::ptrdiff_t>(pt);
              const auto s = static_cast<std::ptrdiff_t>(v * l.stride[1] + j) - static_cast<std::ptrdiff_t>(pl);
              if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(h) || s >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += x[(static_cast<std::size_t>(r) * w + static_cast<std::size_t>(s)) * kk + c] *
                     l.weights[((i * kj + j) * kk + c) * f + q];
            }
        y[(u * vn + v) * f + q] = acc;
      }
  return y;
}

/// Small random HE-friendly model: an optional conv stage (same/valid padding,
/// stride 1-2, average pooling) followed by dense layers, with square or
/// degree-2/3 polynomial activations. Depth stays well under 18.
inline Model random_he_model(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto act = [&]() {
    switch (pick(0, 2)) {
      case 0: return LayerSpec::square();
      case 1: return LayerSpec::poly(2);
      default: return LayerSpec::poly(3);
    }
  };
  Model m;
  if (coin(rng)) {
    const auto h = static_cast<std::size_t>(pick(5, 8));
    m = Model({h, h, static_cast<std::size_t>(pick(1, 3))});
    const auto k = static_cast<std::size_t>(pick(1, 3));
    const auto s = static_cast<std::size_t>(pick(1, 2));
    m.add(LayerSpec::conv2d(static_cast<std::size_t>(pick(1, 4)), {k, k}, {s, s},
                            coin(rng) ? Padding::Same : Padding::Valid));
    m.add(act());
    if (m.output_shape()[0] >= 2 && coin(rng)) m.add(LayerSpec::avg_pool({2, 2}, {2, 2}));
    m.add(LayerSpec::flatten());
  } else {
    m = Model({static_cast<std::size_t>(pick(2, 12))});
  }
  const int hidden = pick(0, 2);
  for (int i = 0; i < hidden; ++i) m.add(LayerSpec::dense(static_cast<std::size_t>(pick(2, 10)))).add(act());
  m.add(LayerSpec::dense(static_cast<std::size_t>(pick(1, 4))));
  m.initialize(rng());
  // Random non-trivial biases and coefficients.
  std::uniform_real_distribution<double> small(-0.3, 0.3);
  for (auto& l : m.layers()) {
    if (l.has_weights())
      for (double& b : l.bias.values()) b = small(rng);
    if (l.kind == LayerKind::PolyAct)
      for (double& c : l.coeffs.values()) c = small(rng);
  }
  return m;
}

/// Zeroes `count` random columns (units or filters) of every non-output
/// Dense/Conv2D layer, keeping at least one.
inline void zero_random_columns(Model& m, std::mt19937_64& rng, double fraction) {
  const std::size_t out = m.output_layer_index();
  for (std::size_t i = 0; i < out; ++i) {
    LayerSpec& l = m.layer(i);
    if (!l.has_weights()) continue;
    const std::size_t rows = l.weight_rows(), cols = l.weight_cols();
    std::vector<std::size_t> idx(cols);
    for (std::size_t c = 0; c < cols; ++c) idx[c] = c;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto c = std::min(cols - 1, static_cast<std::size_t>(fraction * static_cast<double>(cols)));
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t r = 0; r < rows; ++r) l.weights[r * cols + idx[k]] = 0.0;
  }
}

}  // namespace mofhei::testing
