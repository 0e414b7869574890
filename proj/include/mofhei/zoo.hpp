// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mofhei/model.hpp"

namespace mofhei::zoo {

/// Activation used when building a model directly in HE-friendly form.
enum class Act { ReLU, Square, Poly2 };

/// LeNet for 28x28x1 inputs:
///   Conv(c0, 5x5, same) act MaxPool(2) Conv(c1, 5x5) act MaxPool(2)
///   Conv(c2, 5x5) act Flatten Dense(d0) act Dense(10)
/// With `he_friendly`, pools are average pools and `act` is used verbatim.
Model lenet(std::array<std::size_t, 4> units = {6, 16, 120, 84}, Act act = Act::ReLU,
            bool he_friendly = false, std::uint64_t seed = 1);

/// Fully-connected classifier for the 12 grid-stability predictors:
///   Dense(d0) act Dense(d1) act Dense(d2) act Dense(2)
Model fcnet(std::array<std::size_t, 3> units = {64, 128, 256}, Act act = Act::ReLU, std::uint64_t seed = 1);

/// Dense autoencoders over flattened 28x28 images; hidden layers use `act`,
/// the 784-unit reconstruction layer is linear.
///   AE1: 784-32-784, AE2: 784-64-784, AE3: 784-64-32-64-784
Model autoencoder(const std::vector<std::size_t>& hidden, Act act = Act::ReLU, std::uint64_t seed = 1);
Model ae1(Act act = Act::ReLU, std::uint64_t seed = 1);
Model ae2(Act act = Act::ReLU, std::uint64_t seed = 1);
Model ae3(Act act = Act::ReLU, std::uint64_t seed = 1);

/// Builds one of "lenet", "fcnet", "ae1", "ae2", "ae3".
Model by_name(const std::string& name, std::uint64_t seed = 1);

}  // namespace mofhei::zoo
