// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace mofhei::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

std::size_t batch_of(const Tensor& t) { return t.rank() ? t.dim(0) : 0; }

Shape with_batch(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

void check_input(const LayerSpec& l, const Tensor& batch) {
  const Shape& s = batch.shape();
  const bool ok = s.size() == l.input_shape.size() + 1 &&
                  std::equal(l.input_shape.begin(), l.input_shape.end(), s.begin() + 1);
  if (!ok) {
    throw ShapeError(std::string(to_string(l.kind)) + ": expected input " +
                     shape_str(with_batch(batch_of(batch), l.input_shape)) + ", got " + shape_str(s));
  }
}

/// Weights with the mask applied, or the raw weights.
Tensor effective_weights(const LayerSpec& l, const Tensor* mask) {
  if (!mask || mask->empty()) return l.weights;
  if (mask->size() != l.weights.size()) throw ShapeError("weight mask size mismatch");
  Tensor w = l.weights;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= (*mask)[i];
  return w;
}

Tensor dense_forward(const LayerSpec& l, const Tensor& x, const Tensor& w) {
  const std::size_t n = batch_of(x);
  const std::size_t m = l.weight_rows();
  const std::size_t q = l.units;
  Tensor y({n, q});
  MatMap ym(y.data(), n, q);
  ym.noalias() = ConstMatMap(x.data(), n, m) * ConstMatMap(w.data(), m, q);
  ym.rowwise() += ConstVecMap(l.bias.data(), q);
  return y;
}

Tensor conv_forward(const LayerSpec& l, const Tensor& cols, const Tensor& w, std::size_t n) {
  const std::size_t m = l.weight_rows();
  const std::size_t f = l.filters;
  const std::size_t rows = cols.dim(0);
  Tensor y(with_batch(n, l.output_shape));
  MatMap ym(y.data(), rows, f);
  ym.noalias() = ConstMatMap(cols.data(), rows, m) * ConstMatMap(w.data(), m, f);
  ym.rowwise() += ConstVecMap(l.bias.data(), f);
  return y;
}

template <typename Visit>
void for_each_window(const LayerSpec& l, std::size_t n, Visit&& visit) {
  const std::size_t h = l.input_shape[0], w = l.input_shape[1], c = l.input_shape[2];
  const std::size_t u_n = l.output_shape[0], v_n = l.output_shape[1];
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t u = 0; u < u_n; ++u)
      for (std::size_t v = 0; v < v_n; ++v)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t out = ((b * u_n + u) * v_n + v) * c + ch;
          visit(out, [&](auto&& cell) {
            for (std::size_t i = 0; i < l.window[0]; ++i)
              for (std::size_t j = 0; j < l.window[1]; ++j) {
                const std::size_t r = u * l.stride[0] + i, s = v * l.stride[1] + j;
                cell(((b * h + r) * w + s) * c + ch);
              }
          });
        }
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y = x;
  const std::size_t n = batch_of(x), d = x.size() / std::max<std::size_t>(n, 1);
  for (std::size_t b = 0; b < n; ++b) {
    double* row = y.data() + b * d;
    const double mx = *std::max_element(row, row + d);
    double sum = 0;
    for (std::size_t i = 0; i < d; ++i) sum += (row[i] = std::exp(row[i] - mx));
    for (std::size_t i = 0; i < d; ++i) row[i] /= sum;
  }
  return y;
}

std::size_t channels_of(const LayerSpec& l) { return l.input_shape.back(); }

Tensor batch_norm_apply(const LayerSpec& l, const Tensor& x, std::span<const double> mean,
                        std::span<const double> inv_std, Tensor* xhat) {
  const std::size_t c = channels_of(l);
  Tensor y = x;
  if (xhat) *xhat = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t ch = i % c;
    const double h = (x[i] - mean[ch]) * inv_std[ch];
    if (xhat) (*xhat)[i] = h;
    y[i] = l.gamma[ch] * h + l.beta[ch];
  }
  return y;
}

Tensor forward_batch(const LayerSpec& l, const Tensor& x, const Tensor* mask) {
  check_input(l, x);
  const std::size_t n = batch_of(x);
  switch (l.kind) {
    case LayerKind::Dense: return dense_forward(l, x, effective_weights(l, mask));
    case LayerKind::Conv2D: return conv_forward(l, im2col(l, x), effective_weights(l, mask), n);
    case LayerKind::MaxPool2D: {
      Tensor y(with_batch(n, l.output_shape));
      for_each_window(l, n, [&](std::size_t out, auto&& cells) {
        double best = -std::numeric_limits<double>::infinity();
        cells([&](std::size_t in) { best = std::max(best, x[in]); });
        y[out] = best;
      });
      return y;
    }
    case LayerKind::AvgPool2D: {
      Tensor y(with_batch(n, l.output_shape));
      const double k = static_cast<double>(l.window[0] * l.window[1]);
      for_each_window(l, n, [&](std::size_t out, auto&& cells) {
        double sum = 0;
        cells([&](std::size_t in) { sum += x[in]; });
        y[out] = sum / k;
      });
      return y;
    }
    case LayerKind::PolyAct: {
      Tensor y(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double acc = 0;
        for (int k = l.degree; k >= 0; --k) acc = acc * x[i] + l.coeffs[static_cast<std::size_t>(k)];
        y[i] = acc;
      }
      return y;
    }
    case LayerKind::SquareAct: {
      Tensor y = x;
      for (double& v : y.values()) v *= v;
      return y;
    }
    case LayerKind::ReLU: {
      Tensor y = x;
      for (double& v : y.values()) v = std::max(v, 0.0);
      return y;
    }
    case LayerKind::Sigmoid: {
      Tensor y = x;
      for (double& v : y.values()) v = sigmoid(v);
      return y;
    }
    case LayerKind::Softmax: return softmax_rows(x);
    case LayerKind::Flatten: return x.reshaped(with_batch(n, l.output_shape));
    case LayerKind::BatchNorm: {
      const std::size_t c = channels_of(l);
      std::vector<double> inv(c);
      for (std::size_t ch = 0; ch < c; ++ch) inv[ch] = 1.0 / std::sqrt(l.moving_var[ch] + l.epsilon);
      return batch_norm_apply(l, x, l.moving_mean.values(), inv, nullptr);
    }
    case LayerKind::Dropout: return x;
  }
  throw Error("unknown layer kind");
}

}  // namespace

Tensor im2col(const LayerSpec& l, const Tensor& x) {
  const std::size_t n = batch_of(x);
  const std::size_t h = l.input_shape[0], w = l.input_shape[1], c = l.input_shape[2];
  const std::size_t u_n = l.output_shape[0], v_n = l.output_shape[1];
  const std::size_t ki = l.kernel[0], kj = l.kernel[1];
  const std::size_t m = ki * kj * c;
  const std::size_t pt = l.padding == Padding::Same ? same_pad_before(h, ki, l.stride[0]) : 0;
  const std::size_t pl = l.padding == Padding::Same ? same_pad_before(w, kj, l.stride[1]) : 0;
  Tensor cols({n * u_n * v_n, m});
  double* out = cols.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t u = 0; u < u_n; ++u)
      for (std::size_t v = 0; v < v_n; ++v)
        for (std::size_t i = 0; i < ki; ++i)
          for (std::size_t j = 0; j < kj; ++j) {
            const auto r = static_cast<std::ptrdiff_t>(u * l.stride[0] + i) - static_cast<std::ptrdiff_t>(pt);
            const auto s = static_cast<std::ptrdiff_t>(v * l.stride[1] + j) - static_cast<std::ptrdiff_t>(pl);
            if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(h) || s >= static_cast<std::ptrdiff_t>(w)) {
              std::fill(out, out + c, 0.0);
            } else {
              const double* src = x.data() + ((b * h + static_cast<std::size_t>(r)) * w + static_cast<std::size_t>(s)) * c;
              std::copy(src, src + c, out);
            }
            out += c;
          }
  return cols;
}

Tensor layer_forward(const LayerSpec& layer, const Tensor& input) {
  return layer_forward(layer, input, nullptr);
}

Tensor layer_forward(const LayerSpec& layer, const Tensor& input, const Tensor* weight_mask) {
  if (input.shape() == layer.input_shape) {
    Tensor y = forward_batch(layer, input.reshaped(with_batch(1, layer.input_shape)), weight_mask);
    y.reshape(layer.output_shape);
    return y;
  }
  return forward_batch(layer, input, weight_mask);
}

Tensor forward_train(LayerSpec& l, const Tensor& x, LayerCache& cache, std::mt19937_64& rng,
                     const Tensor* mask, bool update_stats) {
  check_input(l, x);
  cache.input = x;
  const std::size_t n = batch_of(x);
  switch (l.kind) {
    case LayerKind::Conv2D:
      cache.aux = im2col(l, x);
      cache.output = conv_forward(l, cache.aux, effective_weights(l, mask), n);
      return cache.output;
    case LayerKind::MaxPool2D: {
      Tensor y(with_batch(n, l.output_shape));
      cache.argmax.assign(y.size(), 0);
      for_each_window(l, n, [&](std::size_t out, auto&& cells) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        cells([&](std::size_t in) {
          if (x[in] > best) {
            best = x[in];
            arg = in;
          }
        });
        y[out] = best;
        cache.argmax[out] = arg;
      });
      cache.output = y;
      return y;
    }
    case LayerKind::BatchNorm: {
      const std::size_t c = channels_of(l);
      const std::size_t count = x.size() / c;
      std::vector<double> mean(c, 0.0), var(c, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) mean[i % c] += x[i];
      for (double& v : mean) v /= static_cast<double>(count);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mean[i % c];
        var[i % c] += d * d;
      }
      for (double& v : var) v /= static_cast<double>(count);
      cache.batch_stats.resize(c);
      for (std::size_t ch = 0; ch < c; ++ch) cache.batch_stats[ch] = 1.0 / std::sqrt(var[ch] + l.epsilon);
      cache.output = batch_norm_apply(l, x, mean, cache.batch_stats, &cache.aux);
      if (update_stats) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          l.moving_mean[ch] = l.momentum * l.moving_mean[ch] + (1 - l.momentum) * mean[ch];
          l.moving_var[ch] = l.momentum * l.moving_var[ch] + (1 - l.momentum) * var[ch];
        }
      }
      return cache.output;
    }
    case LayerKind::Dropout: {
      cache.aux = Tensor(x.shape(), 1.0);
      Tensor y = x;
      if (l.rate > 0) {
        std::bernoulli_distribution keep(1.0 - l.rate);
        const double scale = 1.0 / (1.0 - l.rate);
        for (std::size_t i = 0; i < y.size(); ++i) {
          cache.aux[i] = keep(rng) ? scale : 0.0;
          y[i] *= cache.aux[i];
        }
      }
      cache.output = y;
      return y;
    }
    default:
      cache.output = forward_batch(l, x, mask);
      return cache.output;
  }
}

Tensor backward(const LayerSpec& l, const LayerCache& cache, const Tensor& g,
                std::vector<Tensor>& pg, const Tensor* mask) {
  const Tensor& x = cache.input;
  const std::size_t n = batch_of(x);
  pg.clear();
  for (const Tensor* p : l.params()) pg.emplace_back(p->shape());
  switch (l.kind) {
    case LayerKind::Dense: {
      const std::size_t m = l.weight_rows(), q = l.units;
      const Tensor w = effective_weights(l, mask);
      ConstMatMap gm(g.data(), n, q);
      MatMap(pg[0].data(), m, q).noalias() = ConstMatMap(x.data(), n, m).transpose() * gm;
      VecMap(pg[1].data(), q) = gm.colwise().sum();
      Tensor dx(x.shape());
      MatMap(dx.data(), n, m).noalias() = gm * ConstMatMap(w.data(), m, q).transpose();
      return dx;
    }
    case LayerKind::Conv2D: {
      const std::size_t m = l.weight_rows(), f = l.filters;
      const std::size_t rows = cache.aux.dim(0);
      const Tensor w = effective_weights(l, mask);
      ConstMatMap gm(g.data(), rows, f);
      ConstMatMap cols(cache.aux.data(), rows, m);
      MatMap(pg[0].data(), m, f).noalias() = cols.transpose() * gm;
      VecMap(pg[1].data(), f) = gm.colwise().sum();
      RowMat dcols = gm * ConstMatMap(w.data(), m, f).transpose();
      // col2im
      const std::size_t h = l.input_shape[0], wd = l.input_shape[1], c = l.input_shape[2];
      const std::size_t u_n = l.output_shape[0], v_n = l.output_shape[1];
      const std::size_t ki = l.kernel[0], kj = l.kernel[1];
      const std::size_t pt = l.padding == Padding::Same ? same_pad_before(h, ki, l.stride[0]) : 0;
      const std::size_t pl = l.padding == Padding::Same ? same_pad_before(wd, kj, l.stride[1]) : 0;
      Tensor dx(x.shape());
      const double* src = dcols.data();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t u = 0; u < u_n; ++u)
          for (std::size_t v = 0; v < v_n; ++v)
            for (std::size_t i = 0; i < ki; ++i)
              for (std::size_t j = 0; j < kj; ++j) {
                const auto r = static_cast<std::ptrdiff_t>(u * l.stride[0] + i) - static_cast<std::ptrdiff_t>(pt);
                const auto s = static_cast<std::ptrdiff_t>(v * l.stride[1] + j) - static_cast<std::ptrdiff_t>(pl);
                if (r >= 0 && s >= 0 && r < static_cast<std::ptrdiff_t>(h) && s < static_cast<std::ptrdiff_t>(wd)) {
                  double* dst = dx.data() + ((b * h + static_cast<std::size_t>(r)) * wd + static_cast<std::size_t>(s)) * c;
                  for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
                }
                src += c;
              }
      return dx;
    }
    case LayerKind::MaxPool2D: {
      Tensor dx(x.shape());
      for (std::size_t o = 0; o < g.size(); ++o) dx[cache.argmax[o]] += g[o];
      return dx;
    }
    case LayerKind::AvgPool2D: {
      Tensor dx(x.shape());
      const double k = static_cast<double>(l.window[0] * l.window[1]);
      for_each_window(l, n, [&](std::size_t out, auto&& cells) {
        cells([&](std::size_t in) { dx[in] += g[out] / k; });
      });
      return dx;
    }
    case LayerKind::PolyAct: {
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double deriv = 0, pw = 1;
        for (int k = 0; k <= l.degree; ++k) {
          const auto kk = static_cast<std::size_t>(k);
          pg[0][kk] += g[i] * pw;
          if (k < l.degree) deriv += static_cast<double>(k + 1) * l.coeffs[kk + 1] * pw;
          pw *= x[i];
        }
        dx[i] = g[i] * deriv;
      }
      return dx;
    }
    case LayerKind::SquareAct: {
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = 2.0 * x[i] * g[i];
      return dx;
    }
    case LayerKind::ReLU: {
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? g[i] : 0.0;
      return dx;
    }
    case LayerKind::Sigmoid: {
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = cache.output[i];
        dx[i] = g[i] * y * (1 - y);
      }
      return dx;
    }
    case LayerKind::Softmax: {
      Tensor dx(x.shape());
      const std::size_t d = x.size() / n;
      for (std::size_t b = 0; b < n; ++b) {
        const double* y = cache.output.data() + b * d;
        const double* gr = g.data() + b * d;
        double dot = 0;
        for (std::size_t i = 0; i < d; ++i) dot += gr[i] * y[i];
        for (std::size_t i = 0; i < d; ++i) dx[b * d + i] = y[i] * (gr[i] - dot);
      }
      return dx;
    }
    case LayerKind::Flatten: return g.reshaped(x.shape());
    case LayerKind::BatchNorm: {
      const std::size_t c = channels_of(l);
      const double count = static_cast<double>(x.size() / c);
      std::vector<double> sum_d(c, 0.0), sum_dh(c, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t ch = i % c;
        pg[0][ch] += g[i] * cache.aux[i];
        pg[1][ch] += g[i];
        const double dh = g[i] * l.gamma[ch];
        sum_d[ch] += dh;
        sum_dh[ch] += dh * cache.aux[i];
      }
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t ch = i % c;
        const double dh = g[i] * l.gamma[ch];
        dx[i] = cache.batch_stats[ch] / count * (count * dh - sum_d[ch] - cache.aux[i] * sum_dh[ch]);
      }
      return dx;
    }
    case LayerKind::Dropout: {
      Tensor dx = g;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= cache.aux[i];
      return dx;
    }
  }
  throw Error("unknown layer kind");
}

}  // namespace mofhei::nn
