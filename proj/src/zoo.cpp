// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/zoo.hpp"

#include <random>

namespace mofhei::zoo {

namespace {

LayerSpec make_act(Act act) {
  switch (act) {
    case Act::ReLU: return LayerSpec::relu();
    case Act::Square: return LayerSpec::square();
    case Act::Poly2: return LayerSpec::poly(2);
  }
  return LayerSpec::relu();
}

void seed_poly(Model& m, std::uint64_t seed) {
  // Near-identity start so a freshly built polynomial network trains.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (auto& l : m.layers()) {
    if (l.kind != LayerKind::PolyAct) continue;
    l.coeffs[0] = jitter(rng);
    l.coeffs[1] = 0.5 + jitter(rng);
    l.coeffs[2] = 0.1 + jitter(rng);
  }
}

}  // namespace

Model lenet(std::array<std::size_t, 4> units, Act act, bool he_friendly, std::uint64_t seed) {
  Model m({28, 28, 1});
  auto pool = [&] { return he_friendly ? LayerSpec::avg_pool({2, 2}, {2, 2}) : LayerSpec::max_pool({2, 2}, {2, 2}); };
  m.add(LayerSpec::conv2d(units[0], {5, 5}, {1, 1}, Padding::Same)).add(make_act(act)).add(pool());
  m.add(LayerSpec::conv2d(units[1], {5, 5})).add(make_act(act)).add(pool());
  m.add(LayerSpec::conv2d(units[2], {5, 5})).add(make_act(act)).add(LayerSpec::flatten());
  m.add(LayerSpec::dense(units[3])).add(make_act(act));
  m.add(LayerSpec::dense(10));
  m.initialize(seed);
  seed_poly(m, seed);
  m.metadata()["architecture"] = "lenet";
  return m;
}

Model fcnet(std::array<std::size_t, 3> units, Act act, std::uint64_t seed) {
  Model m({12});
  for (std::size_t u : units) m.add(LayerSpec::dense(u)).add(make_act(act));
  m.add(LayerSpec::dense(2));
  m.initialize(seed);
  seed_poly(m, seed);
  m.metadata()["architecture"] = "fcnet";
  return m;
}

Model autoencoder(const std::vector<std::size_t>& hidden, Act act, std::uint64_t seed) {
  Model m({784});
  for (std::size_t u : hidden) m.add(LayerSpec::dense(u)).add(make_act(act));
  m.add(LayerSpec::dense(784));
  m.initialize(seed);
  seed_poly(m, seed);
  m.metadata()["architecture"] = "autoencoder";
  return m;
}

Model ae1(Act act, std::uint64_t seed) { return autoencoder({32}, act, seed); }
Model ae2(Act act, std::uint64_t seed) { return autoencoder({64}, act, seed); }
Model ae3(Act act, std::uint64_t seed) { return autoencoder({64, 32, 64}, act, seed); }

Model by_name(const std::string& name, std::uint64_t seed) {
  if (name == "lenet") return lenet({6, 16, 120, 84}, Act::ReLU, false, seed);
  if (name == "fcnet") return fcnet({64, 128, 256}, Act::ReLU, seed);
  if (name == "ae1") return ae1(Act::ReLU, seed);
  if (name == "ae2") return ae2(Act::ReLU, seed);
  if (name == "ae3") return ae3(Act::ReLU, seed);
  throw ConfigError("unknown architecture '" + name + "' (expected lenet, fcnet, ae1, ae2, ae3)");
}

}  // namespace mofhei::zoo
