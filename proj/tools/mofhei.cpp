// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train -> make-hefriendly -> prune -> shrink ->
// infer-he, plus cost analysis and the comparison report.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mofhei/config.hpp"
#include "mofhei/datasets.hpp"
#include "mofhei/error.hpp"
#include "mofhei/model_io.hpp"
#include "mofhei/pi.hpp"
#include "mofhei/prune.hpp"
#include "mofhei/transform.hpp"
#include "mofhei/zoo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mofhei;

namespace {

constexpr int kExitError = 1;
constexpr int kExitBadArgs = 2;
constexpr int kExitParse = 3;
constexpr int kExitDepth = 4;
constexpr int kExitDivergence = 5;

struct Options {
  std::string model, out, dataset = "synthetic:mnist_like", config, arch, block_shape, activation, state, csv;
  std::optional<double> sparsity;
  std::optional<int> poly_degree, steps, epochs;
  std::optional<std::int64_t> delta_t;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::size_t limit = 64;
  std::size_t samples = 1500;
  std::vector<std::string> pruned;
};

PipelineConfig resolve_config(const Options& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) {
    c.train.seed = *o.seed;
    c.hef.seed = *o.seed;
  }
  if (o.epochs) c.train.epochs = c.hef.transfer_epochs = c.hef.finetune_epochs = c.prune.epochs =
      c.prune.shrink_epochs = *o.epochs;
  if (o.poly_degree) c.hef.poly_degree = *o.poly_degree;
  if (!o.activation.empty()) {
    c.hef.activation_mode =
        o.activation == "square" ? transform::ActivationMode::Square : transform::ActivationMode::Poly;
  }
  if (o.sparsity) c.prune.sparsity = *o.sparsity;
  if (!o.block_shape.empty()) c.prune.block = parse_block_shape(o.block_shape);
  if (o.steps) c.prune.steps = *o.steps;
  if (o.delta_t) c.prune.delta_t = *o.delta_t;
  if (c.prune.sparsity < 0.0 || c.prune.sparsity >= 1.0) throw ConfigError("--sparsity must be in [0, 1)");
  c.hef.batch_size = c.train.batch_size;
  c.train.validate();
  c.hef.validate();
  c.crypto.validate();
  return c;
}

bool is_autoencoder(const Model& m) {
  const auto it = m.metadata().find("architecture");
  return it != m.metadata().end() && it->second == "autoencoder";
}

Loss loss_for(const Model& m, const Dataset& d) {
  const auto it = m.metadata().find("loss");
  if (it != m.metadata().end()) {
    if (it->second == "mse") return Loss::Mse;
    if (it->second == "binary_cross_entropy") return Loss::BinaryCrossEntropy;
    return Loss::CrossEntropy;
  }
  if (is_autoencoder(m)) return Loss::Mse;
  // Targets that are not 0/1 labels mean regression.
  const auto vals = d.y.values();
  if (std::any_of(vals.begin(), vals.end(), [](double v) { return v != 0.0 && v != 1.0; })) return Loss::Mse;
  if (d.y.rank() == 2 && d.y.dim(1) == 1) return Loss::BinaryCrossEntropy;
  return Loss::CrossEntropy;
}

const char* loss_name(Loss l) {
  switch (l) {
    case Loss::Mse: return "mse";
    case Loss::BinaryCrossEntropy: return "binary_cross_entropy";
    default: return "cross_entropy";
  }
}

data::Splits load_splits(const Options& o, std::uint64_t seed, bool autoencoder, std::size_t max_train) {
  data::Splits s;
  const std::string& spec = o.dataset;
  if (spec == "mnist") {
    const fs::path dir = data::data_dir().value_or("data");
    auto found = data::find_mnist(dir, seed);
    if (!found) throw Error("no MNIST files under " + dir.string() + " (set MOFHEI_DATA_DIR)");
    s = std::move(*found);
  } else if (spec == "egss") {
    const fs::path dir = data::data_dir().value_or("data");
    fs::path csv;
    for (const char* name : {"egss.csv", "egss/Data_for_UCI_named.csv", "Data_for_UCI_named.csv"})
      if (fs::exists(dir / name)) csv = dir / name;
    if (csv.empty()) throw Error("no EGSS CSV under " + dir.string() + " (expected egss.csv)");
    s = data::load_egss_csv(csv, seed);
  } else if (spec.rfind("synthetic:", 0) == 0) {
    const auto kind = data::synthetic_from_string(spec.substr(10));
    if (!kind) throw ConfigError("unknown synthetic kind in --dataset " + spec);
    const Dataset all = data::synthetic(*kind, o.samples, seed, *kind == data::Synthetic::Xor ? 0.1 : 0.0);
    const std::size_t n_test = o.samples / 10, n_val = o.samples / 10;
    s = data::split(all, o.samples - n_test - n_val, n_val, n_test, seed);
  } else {
    throw ConfigError("--dataset must be mnist, egss or synthetic:<kind>, got '" + spec + "'");
  }
  if (max_train && s.train.size() > max_train) s.train = s.train.subset(0, max_train);
  if (autoencoder) {
    s.train = data::as_autoencoder(s.train);
    s.val = data::as_autoencoder(s.val);
    s.test = data::as_autoencoder(s.test);
  }
  return s;
}

Model build_arch(const std::string& arch, const Dataset& d, std::uint64_t seed) {
  if (arch.rfind("mlp:", 0) == 0) {
    Shape in(d.x.shape().begin() + 1, d.x.shape().end());
    Model m(in);
    if (in.size() > 1) m.add(LayerSpec::flatten());
    std::stringstream ss(arch.substr(4));
    std::string tok;
    while (std::getline(ss, tok, ',')) m.add(LayerSpec::dense(std::stoul(tok))).add(LayerSpec::relu());
    m.add(LayerSpec::dense(d.y.size() / d.size()));
    m.initialize(seed);
    m.metadata()["architecture"] = "mlp";
    return m;
  }
  return zoo::by_name(arch, seed);
}

std::string default_arch(const std::string& dataset) {
  if (dataset == "egss") return "fcnet";
  if (dataset == "mnist" || dataset == "synthetic:mnist_like") return "lenet";
  return "mlp:16";
}

double metric_of(const Model& m, const Dataset& d, Loss loss) {
  return monitor_metric(loss) == Metric::Mse ? evaluate_loss(m, d, loss) : evaluate(m, d, Metric::Accuracy);
}

std::string metric_label(Loss loss) { return monitor_metric(loss) == Metric::Mse ? "mse" : "accuracy"; }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void stamp(Model& m, const Options& o, const PipelineConfig& c, Loss loss, double test_metric, const std::string& stage) {
  m.metadata()["seed"] = std::to_string(c.train.seed);
  m.metadata()["dataset"] = o.dataset;
  m.metadata()["loss"] = loss_name(loss);
  m.metadata()["metric_name"] = metric_label(loss);
  m.metadata()["test_metric"] = fmt(test_metric);
  m.metadata()["stage"] = stage;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::string need_path(const std::string& v, const char* flag) {
  if (v.empty()) throw ConfigError(std::string(flag) + " is required");
  return v;
}

json history_json(const TrainHistory& h) {
  return {{"epochs", h.epochs.size()}, {"early_stopped", h.early_stopped}, {"best_val_metric", h.best_val_metric}};
}

int cmd_train(const Options& o) {
  PipelineConfig c = resolve_config(o);
  const std::string arch = o.arch.empty() ? default_arch(o.dataset) : o.arch;
  const bool ae = arch.rfind("ae", 0) == 0;
  data::Splits s = load_splits(o, c.train.seed, ae, c.max_train);
  Model m = build_arch(arch, s.train, c.train.seed);
  const Loss loss = loss_for(m, s.train);
  TrainConfig tc = c.train;
  tc.loss = loss;
  const TrainHistory h = train(m, s.train, s.val, tc);
  const double test = metric_of(m, s.test, loss);
  stamp(m, o, c, loss, test, "trained");
  const fs::path out = need_path(o.out, "--out");
  save_model(m, out);
  json r{{"stage", "train"}, {"arch", arch}, {"seed", c.train.seed}, {"history", history_json(h)},
         {metric_label(loss), test}, {"config", c.to_json()}};
  write_json(fs::path(out.string() + ".report.json"), r);
  std::cout << r.dump(2) << '\n';
  return 0;
}

int cmd_make_hefriendly(const Options& o) {
  PipelineConfig c = resolve_config(o);
  Model m = load_model(need_path(o.model, "--model"));
  data::Splits s = load_splits(o, c.train.seed, is_autoencoder(m), c.max_train);
  const Loss loss = loss_for(m, s.train);
  c.hef.loss = loss;
  const double before = metric_of(m, s.test, loss);
  transform::HefResult r = transform::make_he_friendly(m, s.train, s.val, c.hef);
  const double after = metric_of(r.model, s.test, loss);
  stamp(r.model, o, c, loss, after, "he_friendly");
  const fs::path out = need_path(o.out, "--out");
  save_model(r.model, out);
  json j{{"stage", "make-hefriendly"},
         {"seed", c.train.seed},
         {"conversions", r.log.to_json()},
         {metric_label(loss) + "_before", before},
         {metric_label(loss) + "_after", after}};
  write_json(fs::path(out.string() + ".report.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_prune(const Options& o) {
  PipelineConfig c = resolve_config(o);
  Model m = load_model(need_path(o.model, "--model"));
  data::Splits s = load_splits(o, c.train.seed, is_autoencoder(m), c.max_train);
  const Loss loss = loss_for(m, s.train);
  TrainConfig tc = c.train;
  tc.loss = loss;
  tc.learning_rate = c.prune.learning_rate;
  const auto spe = static_cast<std::int64_t>((s.train.size() + tc.batch_size - 1) / tc.batch_size);
  prune::PruningSchedule sched = prune::default_schedule(c.prune.sparsity, c.prune.epochs, spe);
  sched.s_i = std::min(c.prune.s_i, c.prune.sparsity);
  sched.t_0 = c.prune.t_0;
  if (c.prune.steps > 0) sched.n = c.prune.steps;
  if (c.prune.delta_t > 0) sched.delta_t = c.prune.delta_t;
  std::map<std::size_t, prune::BlockShape> blocks;
  for (std::size_t i : prune::prunable_layers(m)) {
    const std::size_t rows = c.prune.block.rows ? c.prune.block.rows : m.layer(i).weight_rows();
    blocks[i] = {rows, c.prune.block.cols};
  }
  prune::PruneResult r = prune::iterative_block_prune(m, sched, s.train, s.val, tc, blocks);
  const double test = metric_of(r.model, s.test, loss);
  stamp(r.model, o, c, loss, test, "pruned");
  r.model.metadata()["layer_sparsity"] = fmt(c.prune.sparsity);
  const fs::path out = need_path(o.out, "--out");
  save_model(r.model, out);
  prune::save_prune_state(r.state, out.string() + ".prune.json");
  json layers = json::array();
  for (const auto& bm : r.state.masks) {
    layers.push_back({{"layer_index", bm.layer_index},
                      {"blocks", bm.total_blocks()},
                      {"pruned_blocks", bm.pruned_blocks()},
                      {"sparsity", static_cast<double>(bm.pruned_blocks()) / static_cast<double>(bm.total_blocks())}});
  }
  json j{{"stage", "prune"},         {"seed", c.train.seed},      {"target_sparsity", c.prune.sparsity},
         {"layers", layers},         {"history", history_json(r.history)}, {metric_label(loss), test}};
  write_json(fs::path(out.string() + ".report.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_shrink(const Options& o) {
  PipelineConfig c = resolve_config(o);
  const std::string model_path = need_path(o.model, "--model");
  Model m = load_model(model_path);
  const prune::PruneState state =
      prune::load_prune_state(o.state.empty() ? model_path + ".prune.json" : o.state);
  data::Splits s = load_splits(o, c.train.seed, is_autoencoder(m), c.max_train);
  const Loss loss = loss_for(m, s.train);
  TrainConfig tc = c.train;
  tc.loss = loss;
  tc.epochs = c.prune.shrink_epochs;
  tc.learning_rate = c.prune.shrink_learning_rate;
  Model shrunk = prune::shrink(m, state, s.train, s.val, tc);
  const double test = metric_of(shrunk, s.test, loss);
  stamp(shrunk, o, c, loss, test, "shrunk");
  if (m.metadata().count("layer_sparsity")) shrunk.metadata()["layer_sparsity"] = m.metadata().at("layer_sparsity");
  const fs::path out = need_path(o.out, "--out");
  save_model(shrunk, out);
  const prune::SparsityReport sr = prune::sparsity_report(m, shrunk);
  json j{{"stage", "shrink"}, {"seed", c.train.seed}, {"sparsity", sr.to_json()}, {metric_label(loss), test}};
  write_json(fs::path(out.string() + ".report.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

void write_predictions(const fs::path& p, const Tensor& pred) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  const std::size_t n = pred.dim(0), d = pred.size() / n;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) out << (k ? "," : "") << pred[i * d + k];
    out << '\n';
  }
}

Dataset first_rows(const Dataset& d, std::size_t limit) { return limit && d.size() > limit ? d.subset(0, limit) : d; }

double score(const Model& m, const Tensor& pred, const Dataset& d, Loss loss) {
  if (monitor_metric(loss) == Metric::Mse) {
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - d.y[i]) * (pred[i] - d.y[i]);
    return acc / static_cast<double>(pred.size());
  }
  (void)m;
  const std::size_t n = d.size(), k = pred.size() / n;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (k == 1) {
      hit += (pred[i] > 0.0) == (d.y[i] > 0.5);
      continue;
    }
    const double* p = pred.data() + i * k;
    const double* y = d.y.data() + i * k;
    hit += std::max_element(p, p + k) - p == std::max_element(y, y + k) - y;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

int cmd_infer(const Options& o, bool he_mode) {
  PipelineConfig c = resolve_config(o);
  Model m = load_model(need_path(o.model, "--model"));
  data::Splits s = load_splits(o, c.train.seed, is_autoencoder(m), c.max_train);
  const Loss loss = loss_for(m, s.train);
  const Dataset d = first_rows(s.test, o.limit);
  json j{{"stage", he_mode ? "infer-he" : "infer-plain"}, {"seed", c.train.seed}, {"instances", d.size()}};
  Tensor pred;
  if (he_mode) {
    pi::InferResult r = pi::infer(m, d.x, c.crypto, o.workers);
    pred = std::move(r.predictions);
    j["workers"] = o.workers;
    j["cost"] = r.report.to_json();
  } else {
    pred = m.predict(d.x);
  }
  j[metric_label(loss)] = score(m, pred, d, loss);
  if (!o.out.empty()) {
    write_predictions(o.out, pred);
    write_json(o.out + ".report.json", j);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

std::string table(const pi::CostReport& r) {
  std::ostringstream s;
  s << std::left << std::setw(6) << "layer" << std::setw(11) << "kind" << std::right << std::setw(7) << "units"
    << std::setw(12) << "HEO" << std::setw(12) << "executed" << std::setw(7) << "depth" << '\n';
  for (const auto& l : r.per_layer) {
    if (l.total() == 0) continue;
    s << std::left << std::setw(6) << l.layer_index << std::setw(11) << l.kind << std::right << std::setw(7) << l.units
      << std::setw(12) << l.total() << std::setw(12) << l.executed() << std::setw(7) << l.depth << '\n';
  }
  s << std::left << std::setw(24) << "total" << std::right << std::setw(12) << r.totals.total() << std::setw(12)
    << r.totals.total() - r.totals.skipped() << std::setw(7) << r.static_depth << '\n';
  s << "peak memory: " << std::fixed << std::setprecision(1)
    << static_cast<double>(r.peak_memory_bytes) / (1024.0 * 1024.0) << " MiB, depth " << r.static_depth << " of "
    << r.max_depth << '\n';
  return s.str();
}

int cmd_analyze(const Options& o) {
  PipelineConfig c = resolve_config(o);
  Model m = load_model(need_path(o.model, "--model"));
  const pi::CostReport r = pi::analyze_cost(m, c.crypto);
  std::cout << table(r);
  if (!o.out.empty()) write_json(o.out, r.to_json());
  if (!o.csv.empty()) {
    std::ofstream csv(o.csv);
    if (!csv) throw Error("cannot write " + o.csv);
    csv << r.to_csv();
  }
  if (!r.depth_ok()) {
    std::cerr << "error: model needs depth " << r.static_depth << " but max_depth is " << r.max_depth << '\n';
    return kExitDepth;
  }
  return 0;
}

double meta_number(const Model& m, const char* key) {
  const auto it = m.metadata().find(key);
  return it == m.metadata().end() ? std::nan("") : std::stod(it->second);
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

int cmd_report(const Options& o) {
  PipelineConfig c = resolve_config(o);
  const std::string base_path = need_path(o.model, "--model");
  if (o.pruned.empty()) throw ConfigError("--pruned is required (one or more shrunk models)");
  const Model base = load_model(base_path);
  const pi::CostReport base_cost = pi::analyze_cost(base, c.crypto);
  const std::string metric = base.metadata().count("metric_name") ? base.metadata().at("metric_name") : "accuracy";
  const double base_metric = meta_number(base, "test_metric");

  json variants = json::array();
  std::ostringstream csv;
  csv << "model,layer,kind,units_hef,units,reduction_factor,heo_hef,heo\n";
  for (const std::string& path : o.pruned) {
    const Model v = load_model(path);
    if (v.size() != base.size()) throw Error(path + " does not share the layer sequence of " + base_path);
    const pi::CostReport vc = pi::analyze_cost(v, c.crypto);
    const prune::SparsityReport sr = prune::sparsity_report(base, v);
    json layers = json::array();
    for (std::size_t i = 0; i < base_cost.per_layer.size(); ++i) {
      const auto& a = base_cost.per_layer[i];
      const auto& b = vc.per_layer[i];
      if (a.kind != "Dense" && a.kind != "Conv2D") continue;
      const double rf = b.units ? static_cast<double>(a.units) / static_cast<double>(b.units) : 0.0;
      layers.push_back({{"layer_index", a.layer_index},
                        {"kind", a.kind},
                        {"units_hef", a.units},
                        {"units", b.units},
                        {"reduction_factor", rf},
                        {"heo_hef", a.executed()},
                        {"heo", b.executed()}});
      csv << path << ',' << a.layer_index << ',' << a.kind << ',' << a.units << ',' << b.units << ',' << rf << ','
          << a.total() << ',' << b.executed() << '\n';
    }
    const double metric_v = meta_number(v, "test_metric");
    const double heo_b = static_cast<double>(base_cost.totals.total() - base_cost.totals.skipped());
    const double heo_v = static_cast<double>(vc.totals.total() - vc.totals.skipped());
    variants.push_back({{"model", path},
                        {"layer_sparsity", nullable(meta_number(v, "layer_sparsity"))},
                        {"overall_sparsity", sr.overall},
                        {"metric", nullable(metric_v)},
                        {"metric_change", nullable(metric_v - base_metric)},
                        {"heo", static_cast<std::uint64_t>(heo_v)},
                        {"heo_reduction", 1.0 - heo_v / heo_b},
                        {"peak_memory_bytes", vc.peak_memory_bytes},
                        {"memory_ratio", static_cast<double>(base_cost.peak_memory_bytes) /
                                             static_cast<double>(std::max<std::uint64_t>(vc.peak_memory_bytes, 1))},
                        {"static_depth", vc.static_depth},
                        {"layers", layers}});
    csv << path << ",total,,,,," << base_cost.totals.total() - base_cost.totals.skipped() << ',' << static_cast<std::uint64_t>(heo_v) << '\n';
  }
  json j{{"format", "mofhei-report"},
         {"schema_version", 1},
         {"seed", c.train.seed},
         {"metric_name", metric},
         {"crypto", c.to_json()["crypto"]},
         {"baseline",
          {{"model", base_path},
           {"metric", nullable(base_metric)},
           {"heo", base_cost.totals.total() - base_cost.totals.skipped()},
           {"peak_memory_bytes", base_cost.peak_memory_bytes},
           {"static_depth", base_cost.static_depth}}},
         {"variants", variants}};
  if (!o.out.empty()) write_json(o.out, j);
  if (!o.csv.empty()) {
    std::ofstream f(o.csv);
    if (!f) throw Error("cannot write " + o.csv);
    f << csv.str();
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mofhei: HE-friendly conversion, block pruning and simulated private inference"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sc) {
    sc->add_option("--config", o.config, "TOML config with [train], [hef], [prune], [crypto]");
    sc->add_option("--seed", o.seed, "seed for every random choice");
    sc->add_option("--dataset", o.dataset, "mnist, egss or synthetic:<xor|linear|blobs|mnist_like>");
    sc->add_option("--samples", o.samples, "instances generated for synthetic datasets");
    sc->add_option("--epochs", o.epochs, "override every epoch budget in the config");
  };
  auto model_in = [&](CLI::App* sc) { sc->add_option("--model", o.model, "input model file")->required(); };
  auto model_out = [&](CLI::App* sc) { sc->add_option("--out", o.out, "output model file")->required(); };

  auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
  common(train_cmd);
  model_out(train_cmd);
  train_cmd->add_option("--arch", o.arch, "lenet, fcnet, ae1, ae2, ae3 or mlp:<h1,h2,...>");

  auto* hef_cmd = app.add_subcommand("make-hefriendly", "replace max-pools and activations");
  common(hef_cmd);
  model_in(hef_cmd);
  model_out(hef_cmd);
  hef_cmd->add_option("--poly-degree", o.poly_degree, "polynomial degree")->check(CLI::Range(1, 8));
  hef_cmd->add_option("--activation", o.activation, "poly or square")->check(CLI::IsMember({"poly", "square"}));

  auto* prune_cmd = app.add_subcommand("prune", "iterative block pruning");
  common(prune_cmd);
  model_in(prune_cmd);
  model_out(prune_cmd);
  prune_cmd->add_option("--sparsity", o.sparsity, "final layer-wise sparsity s_f");
  prune_cmd->add_option("--block-shape", o.block_shape, "RxC block (R = 0: whole columns)");
  prune_cmd->add_option("--steps", o.steps, "number of mask updates n")->check(CLI::PositiveNumber);
  prune_cmd->add_option("--delta-t", o.delta_t, "optimizer steps between mask updates")->check(CLI::PositiveNumber);

  auto* shrink_cmd = app.add_subcommand("shrink", "remove pruned units and fine-tune");
  common(shrink_cmd);
  model_in(shrink_cmd);
  model_out(shrink_cmd);
  shrink_cmd->add_option("--prune-state", o.state, "prune state (default: <model>.prune.json)");

  auto* plain_cmd = app.add_subcommand("infer-plain", "plaintext inference on the test split");
  auto* he_cmd = app.add_subcommand("infer-he", "simulated encrypted inference on the test split");
  for (auto* sc : {plain_cmd, he_cmd}) {
    common(sc);
    model_in(sc);
    sc->add_option("--out", o.out, "predictions CSV");
    sc->add_option("--limit", o.limit, "test instances to use (0 = all)");
  }
  he_cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);

  auto* cost_cmd = app.add_subcommand("analyze-cost", "static HE operation counts");
  common(cost_cmd);
  model_in(cost_cmd);
  cost_cmd->add_option("--out", o.out, "JSON cost report");
  cost_cmd->add_option("--csv", o.csv, "CSV cost table");

  auto* report_cmd = app.add_subcommand("report", "compare an HE-friendly model with pruned versions");
  common(report_cmd);
  model_in(report_cmd);
  report_cmd->add_option("--pruned", o.pruned, "shrunk model files")->required();
  report_cmd->add_option("--out", o.out, "JSON report");
  report_cmd->add_option("--csv", o.csv, "CSV table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadArgs;
  }

  try {
    if (*train_cmd) return cmd_train(o);
    if (*hef_cmd) return cmd_make_hefriendly(o);
    if (*prune_cmd) return cmd_prune(o);
    if (*shrink_cmd) return cmd_shrink(o);
    if (*plain_cmd) return cmd_infer(o, false);
    if (*he_cmd) return cmd_infer(o, true);
    if (*cost_cmd) return cmd_analyze(o);
    if (*report_cmd) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const VersionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const DepthBudgetError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDepth;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitBadArgs;
}
