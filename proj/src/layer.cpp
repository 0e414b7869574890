// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/layer.hpp"

#include <algorithm>

namespace mofhei {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::Dense, "Dense"},         {LayerKind::Conv2D, "Conv2D"},
    {LayerKind::MaxPool2D, "MaxPool2D"}, {LayerKind::AvgPool2D, "AvgPool2D"},
    {LayerKind::PolyAct, "PolyAct"},     {LayerKind::SquareAct, "SquareAct"},
    {LayerKind::ReLU, "ReLU"},           {LayerKind::Sigmoid, "Sigmoid"},
    {LayerKind::Softmax, "Softmax"},     {LayerKind::Flatten, "Flatten"},
    {LayerKind::BatchNorm, "BatchNorm"}, {LayerKind::Dropout, "Dropout"},
};

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::array<std::size_t, 2> kernel,
                            std::array<std::size_t, 2> stride, Padding padding) {
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.filters = filters;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::max_pool(std::array<std::size_t, 2> window, std::array<std::size_t, 2> stride) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool2D;
  l.window = window;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::avg_pool(std::array<std::size_t, 2> window, std::array<std::size_t, 2> stride) {
  LayerSpec l = max_pool(window, stride);
  l.kind = LayerKind::AvgPool2D;
  return l;
}

LayerSpec LayerSpec::poly(int degree) {
  LayerSpec l;
  l.kind = LayerKind::PolyAct;
  l.degree = degree;
  l.coeffs = Tensor({static_cast<std::size_t>(degree + 1)});
  return l;
}

LayerSpec LayerSpec::square() {
  LayerSpec l;
  l.kind = LayerKind::SquareAct;
  l.trainable = false;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::ReLU;
  return l;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec l;
  l.kind = LayerKind::Sigmoid;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::Softmax;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::batch_norm(double epsilon) {
  LayerSpec l;
  l.kind = LayerKind::BatchNorm;
  l.epsilon = epsilon;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::Dropout;
  l.rate = rate;
  return l;
}

std::vector<Tensor*> LayerSpec::params() {
  switch (kind) {
    case LayerKind::Dense:
    case LayerKind::Conv2D: return {&weights, &bias};
    case LayerKind::PolyAct: return {&coeffs};
    case LayerKind::BatchNorm: return {&gamma, &beta};
    default: return {};
  }
}

std::vector<const Tensor*> LayerSpec::params() const {
  auto p = const_cast<LayerSpec*>(this)->params();
  return {p.begin(), p.end()};
}

std::vector<Tensor*> LayerSpec::state() {
  auto p = params();
  if (kind == LayerKind::BatchNorm) {
    p.push_back(&moving_mean);
    p.push_back(&moving_var);
  }
  return p;
}

std::vector<const Tensor*> LayerSpec::state() const {
  auto p = const_cast<LayerSpec*>(this)->state();
  return {p.begin(), p.end()};
}

std::size_t LayerSpec::param_count() const {
  std::size_t n = 0;
  for (const Tensor* t : params()) n += t->size();
  return n;
}

std::size_t LayerSpec::weight_rows() const {
  if (kind == LayerKind::Dense) return shape_size(input_shape);
  if (kind == LayerKind::Conv2D) return kernel[0] * kernel[1] * input_shape.at(2);
  return 0;
}

std::size_t LayerSpec::weight_cols() const {
  if (kind == LayerKind::Dense) return units;
  if (kind == LayerKind::Conv2D) return filters;
  return 0;
}

std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride, Padding pad) {
  if (pad == Padding::Same) return (in + stride - 1) / stride;
  if (in < kernel) return 0;
  return (in - kernel) / stride + 1;
}

std::size_t same_pad_before(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + kernel;
  const std::size_t total = needed > in ? needed - in : 0;
  return total / 2;
}

Shape infer_output_shape(const LayerSpec& l, const Shape& in) {
  auto need_rank = [&](std::size_t r) {
    if (in.size() != r) {
      throw ShapeError(std::string(to_string(l.kind)) + " expects rank-" + std::to_string(r) +
                       " input, got " + shape_str(in));
    }
  };
  switch (l.kind) {
    case LayerKind::Dense:
      need_rank(1);
      if (l.units == 0) throw ShapeError("Dense with zero units");
      return {l.units};
    case LayerKind::Conv2D: {
      need_rank(3);
      if (l.filters == 0) throw ShapeError("Conv2D with zero filters");
      const std::size_t u = conv_out_dim(in[0], l.kernel[0], l.stride[0], l.padding);
      const std::size_t v = conv_out_dim(in[1], l.kernel[1], l.stride[1], l.padding);
      if (u == 0 || v == 0) throw ShapeError("Conv2D kernel larger than input " + shape_str(in));
      return {u, v, l.filters};
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      need_rank(3);
      const std::size_t u = conv_out_dim(in[0], l.window[0], l.stride[0], Padding::Valid);
      const std::size_t v = conv_out_dim(in[1], l.window[1], l.stride[1], Padding::Valid);
      if (u == 0 || v == 0) throw ShapeError("pool window larger than input " + shape_str(in));
      return {u, v, in[2]};
    }
    case LayerKind::Flatten: return {shape_size(in)};
    case LayerKind::Softmax:
      need_rank(1);
      return in;
    default: return in;
  }
}

}  // namespace mofhei
