// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/prune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "mofhei/nn.hpp"

namespace mofhei::prune {

namespace {

using nlohmann::json;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Value a constant channel takes after an elementwise or pooling layer.
double through(const LayerSpec& l, std::size_t channel, double v) {
  switch (l.kind) {
    case LayerKind::PolyAct: {
      double acc = 0;
      for (int k = l.degree; k >= 0; --k) acc = acc * v + l.coeffs[static_cast<std::size_t>(k)];
      return acc;
    }
    case LayerKind::SquareAct: return v * v;
    case LayerKind::ReLU: return std::max(v, 0.0);
    case LayerKind::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case LayerKind::BatchNorm:
      return l.gamma[channel] * (v - l.moving_mean[channel]) / std::sqrt(l.moving_var[channel] + l.epsilon) +
             l.beta[channel];
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
    case LayerKind::Flatten:
    case LayerKind::Dropout: return v;
    default: throw Error("shrink: unsupported layer " + std::string(to_string(l.kind)) + " between pruned layers");
  }
}

Tensor keep_columns(const Tensor& w, const Shape& new_shape, std::size_t rows, std::size_t cols,
                    const std::vector<std::size_t>& keep) {
  Tensor out(new_shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < keep.size(); ++k) out[r * keep.size() + k] = w[r * cols + keep[k]];
  return out;
}

Tensor keep_rows(const Tensor& w, const Shape& new_shape, std::size_t cols, const std::vector<std::size_t>& keep) {
  Tensor out(new_shape);
  for (std::size_t k = 0; k < keep.size(); ++k)
    std::copy_n(w.data() + keep[k] * cols, cols, out.data() + k * cols);
  return out;
}

Tensor keep_entries(const Tensor& t, const std::vector<std::size_t>& keep) {
  Tensor out({keep.size()});
  for (std::size_t k = 0; k < keep.size(); ++k) out[k] = t[keep[k]];
  return out;
}

}  // namespace

void PruningSchedule::validate() const {
  if (!(s_i >= 0.0 && s_i <= s_f && s_f < 1.0)) throw ConfigError("need 0 <= s_i <= s_f < 1");
  if (n < 1) throw ConfigError("pruning steps n must be >= 1");
  if (delta_t < 1) throw ConfigError("pruning frequency delta_t must be >= 1");
  if (t_0 < 0) throw ConfigError("t_0 must be >= 0");
}

double schedule_sparsity(const PruningSchedule& s, std::int64_t t) {
  s.validate();
  if (t < s.t_0) throw Error("schedule_sparsity: step " + std::to_string(t) + " precedes t_0 = " + std::to_string(s.t_0));
  // Endpoints are returned as given; the cubic alone rounds s_i.
  if (t == s.t_0) return s.s_i;
  if (t >= s.t_0 + s.n * s.delta_t) return s.s_f;
  const double span = static_cast<double>(s.n) * static_cast<double>(s.delta_t);
  const double progress = std::min(1.0, static_cast<double>(t - s.t_0) / span);
  const double rest = 1.0 - progress;
  const double v = s.s_f + (s.s_i - s.s_f) * rest * rest * rest;
  return std::clamp(v, s.s_i, s.s_f);
}

PruningSchedule default_schedule(double s_f, int epochs, std::int64_t steps_per_epoch) {
  PruningSchedule s;
  s.s_f = s_f;
  s.epochs = epochs;
  s.delta_t = std::max<std::int64_t>(1, steps_per_epoch);
  s.n = std::max(1, static_cast<int>(std::floor(0.6 * epochs)));
  return s;
}

std::size_t BlockMask::pruned_blocks() const {
  return static_cast<std::size_t>(std::count(grid.begin(), grid.end(), std::uint8_t{0}));
}

Tensor BlockMask::cell_mask(const Shape& weight_shape) const {
  Tensor m(weight_shape, 1.0);
  if (m.size() != rows * cols) throw ShapeError("block mask does not match weight shape " + shape_str(weight_shape));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (!at(r / block.rows, c / block.cols)) m[r * cols + c] = 0.0;
  return m;
}

WeightMasks PruneState::cell_masks(const Model& model) const {
  WeightMasks out(model.size());
  for (const auto& bm : masks) out.at(bm.layer_index) = bm.cell_mask(model.layer(bm.layer_index).weights.shape());
  return out;
}

bool PruneState::frozen() const {
  return !masks.empty() && std::all_of(masks.begin(), masks.end(), [](const BlockMask& m) { return m.frozen; });
}

json PruneState::to_json() const {
  json jm = json::array();
  for (const auto& m : masks) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.grid_rows; ++r) {
      std::string bits;
      for (std::size_t c = 0; c < m.grid_cols; ++c) bits.push_back(m.at(r, c) ? '1' : '0');
      rows.push_back(bits);
    }
    jm.push_back({{"layer_index", m.layer_index},
                  {"block_shape", {m.block.rows, m.block.cols}},
                  {"matrix_shape", {m.rows, m.cols}},
                  {"grid_shape", {m.grid_rows, m.grid_cols}},
                  {"grid", rows},
                  {"frozen", m.frozen}});
  }
  json j{{"schedule",
          {{"s_i", schedule.s_i},
           {"s_f", schedule.s_f},
           {"n", schedule.n},
           {"t_0", schedule.t_0},
           {"delta_t", schedule.delta_t},
           {"epochs", schedule.epochs}}},
         {"masks", jm}};
  j["freeze_step"] = freeze_step ? json(*freeze_step) : json(nullptr);
  return j;
}

PruneState PruneState::from_json(const json& j) {
  try {
    PruneState s;
    const json& sc = j.at("schedule");
    s.schedule.s_i = sc.at("s_i").get<double>();
    s.schedule.s_f = sc.at("s_f").get<double>();
    s.schedule.n = sc.at("n").get<int>();
    s.schedule.t_0 = sc.at("t_0").get<std::int64_t>();
    s.schedule.delta_t = sc.at("delta_t").get<std::int64_t>();
    s.schedule.epochs = sc.at("epochs").get<int>();
    if (j.contains("freeze_step") && !j["freeze_step"].is_null()) s.freeze_step = j["freeze_step"].get<std::int64_t>();
    for (const json& jm : j.at("masks")) {
      BlockMask m;
      m.layer_index = jm.at("layer_index").get<std::size_t>();
      m.block = {jm.at("block_shape").at(0).get<std::size_t>(), jm.at("block_shape").at(1).get<std::size_t>()};
      m.rows = jm.at("matrix_shape").at(0).get<std::size_t>();
      m.cols = jm.at("matrix_shape").at(1).get<std::size_t>();
      m.grid_rows = jm.at("grid_shape").at(0).get<std::size_t>();
      m.grid_cols = jm.at("grid_shape").at(1).get<std::size_t>();
      m.frozen = jm.at("frozen").get<bool>();
      if (m.grid_rows != ceil_div(m.rows, m.block.rows) || m.grid_cols != ceil_div(m.cols, m.block.cols))
        throw ParseError("prune state: grid shape inconsistent with block shape", 0);
      for (const json& row : jm.at("grid")) {
        const auto bits = row.get<std::string>();
        if (bits.size() != m.grid_cols) throw ParseError("prune state: grid row length mismatch", 0);
        for (char b : bits) {
          if (b != '0' && b != '1') throw ParseError("prune state: grid must be 0/1", 0);
          m.grid.push_back(b == '1');
        }
      }
      if (m.grid.size() != m.grid_rows * m.grid_cols) throw ParseError("prune state: grid row count mismatch", 0);
      s.masks.push_back(std::move(m));
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("prune state: ") + e.what(), 0);
  }
}

void save_prune_state(const PruneState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << state.to_json().dump(2) << '\n';
}

PruneState load_prune_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  return PruneState::from_json(j);
}

std::vector<std::size_t> prunable_layers(const Model& model) {
  std::vector<std::size_t> out;
  if (model.size() == 0) return out;
  const std::size_t last = model.output_layer_index();
  for (std::size_t i = 0; i < last; ++i)
    if (model.layer(i).has_weights()) out.push_back(i);
  return out;
}

std::vector<BlockMask> generate_block_masks(const Model& model, const std::map<std::size_t, BlockShape>& shapes) {
  std::vector<BlockMask> out;
  for (std::size_t i : prunable_layers(model)) {
    const LayerSpec& l = model.layer(i);
    BlockMask m;
    m.layer_index = i;
    m.rows = l.weight_rows();
    m.cols = l.weight_cols();
    const auto it = shapes.find(i);
    m.block = it != shapes.end() ? it->second : BlockShape{m.rows, 1};
    if (m.block.rows == 0 || m.block.cols == 0) throw ConfigError("block shape must be positive");
    m.grid_rows = ceil_div(m.rows, m.block.rows);
    m.grid_cols = ceil_div(m.cols, m.block.cols);
    m.grid.assign(m.grid_rows * m.grid_cols, 1);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<BlockMask> prune_step(std::vector<BlockMask> masks, const Model& model, double s_t) {
  for (BlockMask& m : masks) {
    if (m.frozen) throw Error("prune_step: mask of layer " + std::to_string(m.layer_index) + " is frozen");
    const Tensor& w = model.layer(m.layer_index).weights;
    if (w.size() != m.rows * m.cols) throw ShapeError("prune_step: weights do not match mask");
    const std::size_t total = m.total_blocks();
    std::vector<double> mean(total, 0.0);
    std::vector<std::size_t> cells(total, 0);
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) {
        const std::size_t b = (r / m.block.rows) * m.grid_cols + c / m.block.cols;
        mean[b] += std::abs(w[r * m.cols + c]);
        ++cells[b];
      }
    for (std::size_t b = 0; b < total; ++b) mean[b] /= static_cast<double>(cells[b]);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    // Row-major block index order is the (block row, block col) tie-break.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] < mean[b]; });
    const auto target = static_cast<std::size_t>(std::floor(s_t * static_cast<double>(total) + 1e-9));
    const std::size_t pruned = std::min(target, total - 1);
    std::fill(m.grid.begin(), m.grid.end(), 1);
    for (std::size_t k = 0; k < pruned; ++k) m.grid[order[k]] = 0;
  }
  return masks;
}

PruneResult iterative_block_prune(Model model, const PruningSchedule& sched, const Dataset& train_set,
                                  const Dataset& val, const TrainConfig& cfg,
                                  const std::map<std::size_t, BlockShape>& block_shapes) {
  sched.validate();
  PruneResult res;
  res.state.schedule = sched;
  res.state.masks = generate_block_masks(model, block_shapes);
  WeightMasks cells = res.state.cell_masks(model);

  auto apply_step = [&](std::int64_t step, double s) {
    res.state.masks = prune_step(std::move(res.state.masks), model, s);
    const std::int64_t k = (step - sched.t_0) / sched.delta_t;
    if (k >= sched.n) {
      for (auto& m : res.state.masks) m.frozen = true;
      res.state.freeze_step = step;
    }
    cells = res.state.cell_masks(model);
  };

  TrainHooks hooks;
  hooks.masks = &cells;
  hooks.before_step = [&](std::int64_t step) {
    if (res.state.frozen() || step < sched.t_0 || (step - sched.t_0) % sched.delta_t != 0) return;
    apply_step(step, schedule_sparsity(sched, step));
  };
  hooks.early_stop_enabled = [&] { return res.state.frozen(); };

  TrainConfig tc = cfg;
  tc.epochs = sched.epochs;
  res.history = train(model, train_set, val, tc, hooks);

  if (!res.state.frozen()) {
    // Training ended before the schedule did; jump to the final sparsity.
    apply_step(sched.t_0 + static_cast<std::int64_t>(sched.n) * sched.delta_t, sched.s_f);
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (cells[i].empty()) continue;
    Tensor& w = model.layer(i).weights;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] *= cells[i][k];
  }
  model.metadata()["stage"] = "pruned";
  model.metadata()["layer_sparsity"] = std::to_string(sched.s_f);
  res.model = std::move(model);
  return res;
}

std::pair<Tensor, ConvDenseShapes> conv_to_dense_view(const LayerSpec& conv) {
  if (conv.kind != LayerKind::Conv2D) throw ShapeError("conv_to_dense_view: not a Conv2D layer");
  if (conv.input_shape.size() != 3) throw ShapeError("conv_to_dense_view: input shape unknown");
  ConvDenseShapes s;
  s.F = conv.filters;
  s.I = conv.kernel[0];
  s.J = conv.kernel[1];
  s.K = conv.input_shape[2];
  s.U = conv.output_shape[0];
  s.V = conv.output_shape[1];
  s.M = s.I * s.J * s.K;
  s.N = s.U * s.V;
  if (conv.weights.size() != s.M * s.F) throw ShapeError("conv_to_dense_view: weights do not match (M, F)");
  return {conv.weights.reshaped({s.M, s.F}), s};
}

Tensor im2col(const Tensor& input, const LayerSpec& conv) {
  if (input.shape() != conv.input_shape) {
    throw ShapeError("im2col: input " + shape_str(input.shape()) + " does not match conv input " +
                     shape_str(conv.input_shape));
  }
  Shape batched{1};
  batched.insert(batched.end(), input.shape().begin(), input.shape().end());
  return nn::im2col(conv, input.reshaped(batched));
}

Model shrink_structure(const Model& original, const PruneState& state) {
  Model m = original;
  const WeightMasks cells = state.cell_masks(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (cells[i].empty()) continue;
    Tensor& w = m.layer(i).weights;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] *= cells[i][k];
  }

  std::vector<std::size_t> order;
  for (const auto& bm : state.masks) order.push_back(bm.layer_index);
  std::sort(order.begin(), order.end());

  for (std::size_t li : order) {
    LayerSpec& l = m.layer(li);
    const std::size_t rows = l.weight_rows(), cols = l.weight_cols();
    std::vector<std::size_t> keep, drop;
    for (std::size_t c = 0; c < cols; ++c) {
      bool zero = true;
      for (std::size_t r = 0; r < rows && zero; ++r) zero = l.weights[r * cols + c] == 0.0;
      (zero ? drop : keep).push_back(c);
    }
    if (keep.empty()) throw Error("shrink: layer " + std::to_string(li) + " would lose every unit");
    if (drop.empty()) continue;

    // Next parameterized layer and the shape entering its Flatten (if any).
    std::size_t next = li + 1;
    std::optional<Shape> flatten_in;
    while (next < m.size() && !m.layer(next).has_weights()) {
      if (m.layer(next).kind == LayerKind::Flatten) flatten_in = m.layer(next).input_shape;
      ++next;
    }
    if (next >= m.size()) throw Error("shrink: pruned layer " + std::to_string(li) + " has no successor");
    LayerSpec& nx = m.layer(next);
    const std::size_t n_rows = nx.weight_rows(), n_cols = nx.weight_cols();

    // Input rows of `nx` fed by each output channel of `l`.
    auto rows_of = [&](std::size_t c) {
      std::vector<std::size_t> r;
      if (nx.kind == LayerKind::Conv2D) {
        const std::size_t k_n = nx.input_shape[2];
        for (std::size_t ij = 0; ij < nx.kernel[0] * nx.kernel[1]; ++ij) r.push_back(ij * k_n + c);
      } else if (flatten_in) {
        const std::size_t ch = flatten_in->back(), spatial = shape_size(*flatten_in) / ch;
        for (std::size_t p = 0; p < spatial; ++p) r.push_back(p * ch + c);
      } else {
        r.push_back(c);
      }
      return r;
    };

    std::set<std::size_t> drop_rows;
    for (std::size_t c : drop) {
      double v = l.bias[c];
      for (std::size_t k = li + 1; k < next; ++k) v = through(m.layer(k), c, v);
      for (std::size_t r : rows_of(c)) {
        drop_rows.insert(r);
        for (std::size_t q = 0; q < n_cols; ++q) nx.bias[q] += nx.weights[r * n_cols + q] * v;
      }
    }

    // Drop the columns of `l`.
    const std::size_t k = keep.size();
    if (l.kind == LayerKind::Dense) {
      l.weights = keep_columns(l.weights, {rows, k}, rows, cols, keep);
      l.units = k;
    } else {
      l.weights = keep_columns(l.weights, {l.kernel[0], l.kernel[1], l.input_shape[2], k}, rows, cols, keep);
      l.filters = k;
    }
    l.bias = keep_entries(l.bias, keep);
    for (std::size_t b = li + 1; b < next; ++b) {
      LayerSpec& mid = m.layer(b);
      if (mid.kind != LayerKind::BatchNorm) continue;
      for (Tensor* t : mid.state()) *t = keep_entries(*t, keep);
    }

    // Drop the matching input rows of `nx`.
    std::vector<std::size_t> keep_r;
    for (std::size_t r = 0; r < n_rows; ++r)
      if (!drop_rows.count(r)) keep_r.push_back(r);
    const Shape nshape = nx.kind == LayerKind::Dense ? Shape{keep_r.size(), n_cols}
                                                     : Shape{nx.kernel[0], nx.kernel[1], k, n_cols};
    nx.weights = keep_rows(nx.weights, nshape, n_cols, keep_r);
    m.reshape_chain();
  }
  m.validate();
  m.metadata()["stage"] = "shrunk";
  return m;
}

Model shrink(const Model& model, const PruneState& state, const Dataset& train_set, const Dataset& val,
             const TrainConfig& cfg) {
  if (!state.frozen()) throw Error("shrink: masks are not frozen");
  Model m = shrink_structure(model, state);
  train(m, train_set, val, cfg);
  return m;
}

json SparsityReport::to_json() const {
  json layers = json::array();
  for (const auto& l : per_layer) {
    layers.push_back({{"layer_index", l.layer_index},
                      {"kind", to_string(l.kind)},
                      {"units_before", l.units_before},
                      {"units_after", l.units_after},
                      {"params_before", l.params_before},
                      {"params_after", l.params_after},
                      {"sparsity", l.sparsity},
                      {"unit_sparsity", l.unit_sparsity}});
  }
  return {{"per_layer", layers}, {"overall", overall}};
}

SparsityReport sparsity_report(const Model& original, const Model& shrunk) {
  if (original.size() != shrunk.size()) throw ShapeError("sparsity_report: models have different layer counts");
  SparsityReport rep;
  std::size_t before = 0, after = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const LayerSpec& a = original.layer(i);
    const LayerSpec& b = shrunk.layer(i);
    if (a.kind != b.kind) throw ShapeError("sparsity_report: layer " + std::to_string(i) + " kinds differ");
    before += a.param_count();
    after += b.param_count();
  }
  for (std::size_t i : prunable_layers(original)) {
    const LayerSpec& a = original.layer(i);
    const LayerSpec& b = shrunk.layer(i);
    LayerSparsity s;
    s.layer_index = i;
    s.kind = a.kind;
    s.units_before = a.weight_cols();
    s.units_after = b.weight_cols();
    s.params_before = a.param_count();
    s.params_after = b.param_count();
    s.sparsity = 1.0 - static_cast<double>(s.params_after) / static_cast<double>(s.params_before);
    s.unit_sparsity = 1.0 - static_cast<double>(s.units_after) / static_cast<double>(s.units_before);
    rep.per_layer.push_back(s);
  }
  rep.overall = before ? 1.0 - static_cast<double>(after) / static_cast<double>(before) : 0.0;
  return rep;
}

}  // namespace mofhei::prune
