// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/pi.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "mofhei/error.hpp"
#include "mofhei/nn.hpp"
#include "mofhei/transform.hpp"

namespace mofhei::pi {

namespace {

using he::OpCounters;
using he::OpKind;
using he::PackedVec;

int ceil_log2(int d) { return d <= 1 ? 0 : std::bit_width(static_cast<unsigned>(d - 1)); }

/// Levels a layer consumes.
int layer_depth(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Dense:
    case LayerKind::Conv2D:
    case LayerKind::AvgPool2D:
    case LayerKind::SquareAct: return 1;
    case LayerKind::PolyAct: return ceil_log2(l.degree) + 1;
    default: return 0;
  }
}

bool elementwise(LayerKind k) { return k == LayerKind::SquareAct || k == LayerKind::PolyAct; }

bool conv_pads(const LayerSpec& l) {
  if (l.padding != Padding::Same) return false;
  for (int d = 0; d < 2; ++d) {
    const std::size_t need = (l.output_shape[d] - 1) * l.stride[d] + l.kernel[d];
    if (need > l.input_shape[d]) return true;
  }
  return false;
}

/// Resident ciphertext bytes while a layer runs: inputs and outputs (and the
/// padding ciphertext) for linear and pooling layers; elementwise layers work
/// in place, so only the larger of the two sets counts.
std::uint64_t layer_bytes(LayerKind kind, std::size_t in_count, int in_level, std::size_t out_count, int out_level,
                          bool padding, const he::PackingConfig& cfg) {
  const std::uint64_t in = in_count * cfg.ciphertext_bytes(std::max(in_level, 0));
  const std::uint64_t out = out_count * cfg.ciphertext_bytes(std::max(out_level, 0));
  if (kind == LayerKind::Flatten || kind == LayerKind::Softmax) return in;
  if (elementwise(kind)) return std::max(in, out);
  return in + out + (padding ? cfg.ciphertext_bytes(std::max(in_level, 0)) : 0);
}

void check_model(const Model& model) {
  if (!transform::is_he_friendly(model)) throw Error("model is not HE-friendly; run make-hefriendly first");
  model.validate();
}

std::vector<Task> linear_tasks(const LayerSpec& l) {
  const std::size_t m = l.weight_rows(), f = l.weight_cols();
  std::vector<Task> tasks;
  auto finish = [&](Task& t, std::size_t col, auto&& input_of) {
    t.bias = l.bias[col];
    for (std::size_t r = 0; r < m; ++r) {
      const double w = l.weights[r * f + col];
      if (w == 0.0) {
        ++t.skipped_mul;
        continue;
      }
      t.inputs.push_back(input_of(r));
      t.weights.push_back(w);
    }
    if (t.weights.empty()) {
      t.skipped = true;
      t.skipped_add = static_cast<std::uint32_t>(m - 1);
    } else {
      t.skipped_add = t.skipped_mul;
    }
  };

  if (l.kind == LayerKind::Dense) {
    tasks.resize(f);
    for (std::size_t q = 0; q < f; ++q)
      finish(tasks[q], q, [](std::size_t r) { return static_cast<std::uint32_t>(r); });
    return tasks;
  }
  const std::size_t h = l.input_shape[0], w = l.input_shape[1], k = l.input_shape[2];
  const std::size_t un = l.output_shape[0], vn = l.output_shape[1];
  const std::size_t ki = l.kernel[0], kj = l.kernel[1];
  const std::size_t pt = l.padding == Padding::Same ? same_pad_before(h, ki, l.stride[0]) : 0;
  const std::size_t pl = l.padding == Padding::Same ? same_pad_before(w, kj, l.stride[1]) : 0;
  tasks.resize(un * vn * f);
  for (std::size_t u = 0; u < un; ++u)
    for (std::size_t v = 0; v < vn; ++v)
      for (std::size_t q = 0; q < f; ++q) {
        auto input_of = [&](std::size_t r) -> std::uint32_t {
          const std::size_t i = r / (kj * k), j = (r / k) % kj, c = r % k;
          const auto hh = static_cast<std::ptrdiff_t>(u * l.stride[0] + i) - static_cast<std::ptrdiff_t>(pt);
          const auto ww = static_cast<std::ptrdiff_t>(v * l.stride[1] + j) - static_cast<std::ptrdiff_t>(pl);
          if (hh < 0 || ww < 0 || hh >= static_cast<std::ptrdiff_t>(h) || ww >= static_cast<std::ptrdiff_t>(w))
            return kPadding;
          return static_cast<std::uint32_t>((static_cast<std::size_t>(hh) * w + static_cast<std::size_t>(ww)) * k + c);
        };
        finish(tasks[(u * vn + v) * f + q], q, input_of);
      }
  return tasks;
}

std::vector<Task> pool_tasks(const LayerSpec& l) {
  const std::size_t w = l.input_shape[1], c = l.input_shape[2];
  const std::size_t un = l.output_shape[0], vn = l.output_shape[1];
  std::vector<Task> tasks(un * vn * c);
  for (std::size_t u = 0; u < un; ++u)
    for (std::size_t v = 0; v < vn; ++v)
      for (std::size_t ch = 0; ch < c; ++ch) {
        Task& t = tasks[(u * vn + v) * c + ch];
        for (std::size_t i = 0; i < l.window[0]; ++i)
          for (std::size_t j = 0; j < l.window[1]; ++j)
            t.inputs.push_back(static_cast<std::uint32_t>(((u * l.stride[0] + i) * w + v * l.stride[1] + j) * c + ch));
      }
  return tasks;
}

/// Calls fn(i, worker) for i in [0, n), items striped over the workers.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i, t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

PiProgram compile(const Model& model, const he::PackingConfig& cfg_in) {
  check_model(model);
  PiProgram prog;
  prog.cfg = cfg_in.resolved();
  prog.input_shape = model.input_shape();
  prog.in_features = shape_size(prog.input_shape);
  prog.out_features = shape_size(model.output_shape());
  int level = prog.cfg.depth();
  std::size_t count = prog.in_features;

  for (std::size_t i = 0; i < model.size(); ++i) {
    const LayerSpec& l = model.layer(i);
    if (l.kind == LayerKind::Softmax) {
      prog.client_softmax = true;
      continue;
    }
    if (l.kind == LayerKind::Flatten) continue;
    const int d = layer_depth(l);
    if (level - d < 0) {
      throw DepthBudgetError("layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ") needs " +
                             std::to_string(prog.cfg.depth() - level + d) + " levels; max_depth is " +
                             std::to_string(prog.cfg.depth()));
    }
    LayerProgram lp;
    lp.layer_index = i;
    lp.kind = l.kind;
    lp.in_count = count;
    lp.out_count = shape_size(l.output_shape);
    lp.in_level = level;
    lp.out_level = level - d;
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D:
        lp.units = l.weight_cols();
        lp.tasks = linear_tasks(l);
        lp.uses_padding = l.kind == LayerKind::Conv2D && conv_pads(l);
        break;
      case LayerKind::AvgPool2D:
        lp.units = l.input_shape.back();
        lp.tasks = pool_tasks(l);
        lp.pool_scale = 1.0 / static_cast<double>(l.window[0] * l.window[1]);
        break;
      case LayerKind::PolyAct:
        lp.coeffs.assign(l.coeffs.values().begin(), l.coeffs.values().end());
        [[fallthrough]];
      case LayerKind::SquareAct: lp.units = l.output_shape.empty() ? 0 : l.output_shape.back(); break;
      default: throw Error("compile: unsupported layer " + std::string(to_string(l.kind)));
    }
    level = lp.out_level;
    count = lp.out_count;
    prog.layers.push_back(std::move(lp));
  }
  prog.depth = prog.cfg.depth() - level;
  return prog;
}

CostReport analyze_cost(const Model& model, const he::PackingConfig& cfg_in) {
  check_model(model);
  const he::PackingConfig cfg = cfg_in.resolved();
  CostReport rep;
  rep.max_depth = cfg.depth();
  int level = cfg.depth();
  std::uint64_t in_count = shape_size(model.input_shape());

  for (std::size_t i = 0; i < model.size(); ++i) {
    const LayerSpec& l = model.layer(i);
    LayerCost c;
    c.layer_index = i;
    c.kind = to_string(l.kind);
    c.outputs = shape_size(l.output_shape);
    c.depth = layer_depth(l);
    const std::uint64_t e = c.outputs;
    OpCounters& o = c.ops;
    bool padding = false;
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const std::uint64_t m = l.weight_rows(), q = l.weight_cols();
        const std::uint64_t positions = e / q;  // 1 for Dense, U*V for Conv2D
        c.units = q;
        o.ct_pt_mul = e * m;
        o.ct_add = e * (m - 1);
        o.ct_pt_add = e;
        for (std::uint64_t col = 0; col < q; ++col) {
          std::uint64_t zeros = 0;
          for (std::uint64_t r = 0; r < m; ++r) zeros += l.weights[r * q + col] == 0.0;
          o.skipped_mul += positions * zeros;
          o.skipped_add += positions * (zeros == m ? m - 1 : zeros);
        }
        padding = l.kind == LayerKind::Conv2D && conv_pads(l);
        break;
      }
      case LayerKind::AvgPool2D: {
        const std::uint64_t k = l.window[0] * l.window[1];
        c.units = l.output_shape.back();
        o.ct_add = e * (k - 1);
        o.ct_pt_mul = e;
        break;
      }
      case LayerKind::SquareAct:
        c.units = l.output_shape.back();
        o.ct_ct_mul = e;
        break;
      case LayerKind::PolyAct: {
        const auto d = static_cast<std::uint64_t>(l.degree);
        c.units = l.output_shape.back();
        o.ct_ct_mul = e * (d - 1);
        o.ct_pt_mul = e * d;
        o.ct_add = e * (d - 1);
        o.ct_pt_add = e;
        break;
      }
      default: c.units = l.output_shape.empty() ? 0 : l.output_shape.back(); break;
    }
    const int out_level = level - c.depth;
    o.peak_live_bytes = layer_bytes(l.kind, in_count, level, e, out_level, padding, cfg);
    rep.totals.merge(o);
    rep.static_depth += c.depth;
    level = out_level;
    if (l.kind != LayerKind::Softmax) in_count = e;
    rep.per_layer.push_back(std::move(c));
  }
  rep.peak_memory_bytes = rep.totals.peak_live_bytes;
  return rep;
}

ExecResult execute(const PiProgram& prog, const std::vector<PackedVec>& input, int workers) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (input.size() != prog.in_features) {
    throw ShapeError("execute: expected " + std::to_string(prog.in_features) + " input ciphertexts, got " +
                     std::to_string(input.size()));
  }
  const he::PackingConfig& cfg = prog.cfg;
  const std::size_t w = static_cast<std::size_t>(workers);
  ExecResult res;
  std::vector<PackedVec> cur = input;

  for (const LayerProgram& lp : prog.layers) {
    const std::string ctx = "layer " + std::to_string(lp.layer_index) + " (" + std::string(to_string(lp.kind)) + ")";
    for (const PackedVec& v : cur) {
      if (v.level() != lp.in_level) throw Error("execute: " + ctx + " received a ciphertext at an unexpected level");
    }
    std::vector<OpCounters> counters(w);
    std::vector<std::optional<PackedVec>> out(lp.out_count);
    std::optional<PackedVec> zero;
    if (lp.uses_padding) zero = he::zero_ciphertext(cfg, lp.in_level);
    auto op = [&](OpKind k, const PackedVec& a, const PackedVec& b, std::size_t t) {
      return he::simd_op(k, a, b, counters[t], cfg, ctx.c_str());
    };
    auto in_at = [&](std::uint32_t idx) -> const PackedVec& { return idx == kPadding ? *zero : cur[idx]; };

    switch (lp.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D:
        parallel_for(lp.tasks.size(), workers, [&](std::size_t i, std::size_t t) {
          const Task& task = lp.tasks[i];
          counters[t].skipped_mul += task.skipped_mul;
          counters[t].skipped_add += task.skipped_add;
          if (task.skipped) {
            out[i] = op(OpKind::CtPtAdd, he::zero_ciphertext(cfg, lp.out_level), he::encode_scalar(task.bias, cfg), t);
            return;
          }
          PackedVec acc = op(OpKind::CtPtMul, in_at(task.inputs[0]), he::encode_scalar(task.weights[0], cfg), t);
          for (std::size_t r = 1; r < task.inputs.size(); ++r) {
            acc = op(OpKind::CtAdd, acc,
                     op(OpKind::CtPtMul, in_at(task.inputs[r]), he::encode_scalar(task.weights[r], cfg), t), t);
          }
          out[i] = op(OpKind::CtPtAdd, acc, he::encode_scalar(task.bias, cfg), t);
        });
        break;
      case LayerKind::AvgPool2D:
        parallel_for(lp.tasks.size(), workers, [&](std::size_t i, std::size_t t) {
          const Task& task = lp.tasks[i];
          PackedVec acc = cur[task.inputs[0]];
          for (std::size_t r = 1; r < task.inputs.size(); ++r) acc = op(OpKind::CtAdd, acc, cur[task.inputs[r]], t);
          out[i] = op(OpKind::CtPtMul, acc, he::encode_scalar(lp.pool_scale, cfg), t);
        });
        break;
      case LayerKind::SquareAct:
        parallel_for(cur.size(), workers,
                     [&](std::size_t i, std::size_t t) { out[i] = op(OpKind::CtCtMul, cur[i], cur[i], t); });
        break;
      case LayerKind::PolyAct: {
        const int d = static_cast<int>(lp.coeffs.size()) - 1;
        parallel_for(cur.size(), workers, [&](std::size_t i, std::size_t t) {
          std::vector<PackedVec> pw{cur[i]};  // pw[k - 1] holds x^k
          for (int k = 2; k <= d; ++k) pw.push_back(op(OpKind::CtCtMul, pw[(k + 1) / 2 - 1], pw[k / 2 - 1], t));
          PackedVec acc = op(OpKind::CtPtMul, pw[0], he::encode_scalar(lp.coeffs[1], cfg), t);
          for (int k = 2; k <= d; ++k) {
            acc = op(OpKind::CtAdd, acc,
                     op(OpKind::CtPtMul, pw[static_cast<std::size_t>(k - 1)],
                        he::encode_scalar(lp.coeffs[static_cast<std::size_t>(k)], cfg), t),
                     t);
          }
          out[i] = op(OpKind::CtPtAdd, acc, he::encode_scalar(lp.coeffs[0], cfg), t);
        });
        break;
      }
      default: throw Error("execute: unsupported layer in program");
    }

    std::vector<PackedVec> next;
    next.reserve(out.size());
    for (auto& v : out) next.push_back(std::move(*v));

    OpCounters layer;
    for (const auto& c : counters) layer.merge(c);
    const std::uint64_t in_b = he::memory_snapshot(cur, cfg), out_b = he::memory_snapshot(next, cfg);
    if (elementwise(lp.kind)) {
      layer.peak_live_bytes = std::max(in_b, out_b);
    } else {
      layer.peak_live_bytes = in_b + out_b + (zero ? he::memory_snapshot(std::span(&*zero, 1), cfg) : 0);
    }
    res.counters.merge(layer);
    res.per_layer.push_back(layer);
    cur = std::move(next);
  }
  res.outputs = std::move(cur);
  return res;
}

InferResult infer(const Model& model, const Tensor& batch, const he::PackingConfig& cfg, int workers) {
  const auto start = std::chrono::steady_clock::now();
  PiProgram prog = compile(model, cfg);
  const std::size_t b = prog.cfg.slots();
  if (batch.rank() < 1) throw ShapeError("infer: need a batch dimension");
  const std::size_t n = batch.dim(0);
  if (batch.size() != n * prog.in_features) {
    throw ShapeError("infer: batch " + shape_str(batch.shape()) + " does not match model input " +
                     shape_str(prog.input_shape));
  }
  const Tensor flat = batch.reshaped({n, prog.in_features});
  Tensor logits({n, prog.out_features});
  OpCounters total;
  for (std::size_t lo = 0; lo < n; lo += b) {
    const std::size_t hi = std::min(n, lo + b);
    prog.cfg.slot_count = hi - lo;
    const auto packed = he::batch_pack(flat.slice(lo, hi), prog.cfg);
    const ExecResult r = execute(prog, packed, workers);
    const Tensor out = he::batch_unpack(r.outputs, hi - lo);
    std::copy(out.data(), out.data() + out.size(), logits.data() + lo * prog.out_features);
    total.merge(r.counters);
  }

  Shape out_shape{n};
  const Shape os = model.output_shape();
  out_shape.insert(out_shape.end(), os.begin(), os.end());
  Tensor pred = logits.reshaped(out_shape);
  if (prog.client_softmax) pred = nn::layer_forward(model.layer(model.size() - 1), pred);

  InferResult res{std::move(pred), analyze_cost(model, cfg)};
  res.report.executed = total;
  res.report.batch = n;
  res.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : per_layer) {
    nlohmann::json j = l.ops.to_json();
    j.erase("peak_live_bytes");
    j["layer_index"] = l.layer_index;
    j["kind"] = l.kind;
    j["units"] = l.units;
    j["outputs"] = l.outputs;
    j["depth"] = l.depth;
    j["executed"] = l.executed();
    j["live_bytes"] = l.ops.peak_live_bytes;
    layers.push_back(std::move(j));
  }
  nlohmann::json t = totals.to_json();
  t.erase("peak_live_bytes");
  t["executed"] = totals.total() - totals.skipped();
  nlohmann::json j{{"layers", layers},
                   {"totals", t},
                   {"static_depth", static_depth},
                   {"max_depth", max_depth},
                   {"depth_ok", depth_ok()},
                   {"peak_memory_bytes", peak_memory_bytes}};
  if (executed) j["executed_counters"] = executed->to_json();
  if (wall_seconds) j["wall_seconds"] = *wall_seconds;
  if (batch) j["batch"] = batch;
  return j;
}

std::string CostReport::to_csv() const {
  std::ostringstream s;
  s << "layer,kind,units,ct_pt_mul,ct_ct_mul,ct_add,ct_pt_add,skipped_mul,skipped_add,heo,executed,depth\n";
  auto row = [&](const std::string& head, const he::OpCounters& o, int depth) {
    s << head << ',' << o.ct_pt_mul << ',' << o.ct_ct_mul << ',' << o.ct_add << ',' << o.ct_pt_add << ','
      << o.skipped_mul << ',' << o.skipped_add << ',' << o.total() << ',' << o.total() - o.skipped() << ',' << depth
      << '\n';
  };
  for (const auto& l : per_layer) row(std::to_string(l.layer_index) + ',' + l.kind + ',' + std::to_string(l.units), l.ops, l.depth);
  row("total,,", totals, static_depth);
  return s.str();
}

}  // namespace mofhei::pi
