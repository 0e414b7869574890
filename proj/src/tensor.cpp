// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mofhei {

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::slice(std::size_t begin, std::size_t end) const {
  if (rank() == 0 || begin > end || end > shape_[0]) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(shape_));
  }
  const std::size_t row = shape_[0] ? data_.size() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                                  data_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

Tensor Tensor::gather(std::span<const std::size_t> rows) const {
  const std::size_t row = shape_[0] ? data_.size() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = rows.size();
  Tensor out(std::move(s));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= shape_[0]) throw ShapeError("gather row out of range");
    std::memcpy(out.data() + r * row, data_.data() + rows[r] * row, row * sizeof(double));
  }
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace mofhei
