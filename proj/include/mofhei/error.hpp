// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mofhei {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shape disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `offset` is the byte (or row, for CSV) position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(int epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// A ciphertext ran out of multiplicative levels, or a program needs more
/// depth than the parameters allow.
class DepthBudgetError : public Error {
 public:
  using Error::Error;
};

/// A batch does not fit into the available slots.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace mofhei
