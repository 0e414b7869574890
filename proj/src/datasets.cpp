// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <boost/tokenizer.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

namespace mofhei::data {

namespace {

/// Whole file, transparently gunzipped.
std::vector<unsigned char> read_maybe_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error("cannot open " + path.string());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf;
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) out.insert(out.end(), buf.begin(), buf.begin() + n);
  int err = 0;
  const char* msg = gzerror(f, &err);
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw ParseError(path.string() + ": read error: " + (msg ? msg : "?"), out.size());
  }
  return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& p) {
  if (off + 4 > b.size()) throw ParseError(p.string() + ": truncated header", b.size());
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

const std::array<std::string, 12> kEgssPredictors = {"tau1", "tau2", "tau3", "tau4", "p1", "p2",
                                                     "p3",   "p4",   "g1",   "g2",   "g3", "g4"};

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_maybe_gz(images);
  const auto lab = read_maybe_gz(labels);
  if (const auto magic = be32(img, 0, images); magic != 0x00000803) {
    throw ParseError(images.string() + ": bad image magic " + std::to_string(magic), 0);
  }
  if (const auto magic = be32(lab, 0, labels); magic != 0x00000801) {
    throw ParseError(labels.string() + ": bad label magic " + std::to_string(magic), 0);
  }
  const std::size_t n = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  if (rows != 28 || cols != 28) throw ParseError(images.string() + ": expected 28x28 images", 8);
  if (be32(lab, 4, labels) != n) throw ParseError(labels.string() + ": label count differs from image count", 4);
  if (img.size() != 16 + n * rows * cols) {
    throw ParseError(images.string() + ": expected " + std::to_string(16 + n * rows * cols) + " bytes", img.size());
  }
  if (lab.size() != 8 + n) throw ParseError(labels.string() + ": expected " + std::to_string(8 + n) + " bytes", lab.size());

  Dataset d{Tensor({n, 28, 28, 1}), Tensor({n, 10})};
  for (std::size_t i = 0; i < n * 784; ++i) d.x[i] = img[16 + i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned label = lab[8 + i];
    if (label > 9) throw ParseError(labels.string() + ": label out of range", 8 + i);
    d.y.at(i, label) = 1.0;
  }
  return d;
}

std::optional<std::filesystem::path> data_dir() {
  if (const char* env = std::getenv("MOFHEI_DATA_DIR"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

std::optional<Splits> find_mnist(const std::filesystem::path& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  auto pick = [&](const fs::path& base, const std::string& stem) -> std::optional<fs::path> {
    for (const char* ext : {"", ".gz"}) {
      fs::path p = base / (stem + ext);
      if (fs::exists(p)) return p;
    }
    return std::nullopt;
  };
  for (const fs::path& base : {dir, dir / "mnist"}) {
    const auto tr_i = pick(base, "train-images-idx3-ubyte"), tr_l = pick(base, "train-labels-idx1-ubyte");
    const auto te_i = pick(base, "t10k-images-idx3-ubyte"), te_l = pick(base, "t10k-labels-idx1-ubyte");
    if (!(tr_i && tr_l && te_i && te_l)) continue;
    const Dataset full = load_mnist_idx(*tr_i, *tr_l);
    const std::size_t n_val = full.size() / 20;
    Splits s = split(full, full.size() - n_val, n_val, 0, seed);
    s.test = load_mnist_idx(*te_i, *te_l);
    return s;
  }
  // Fallback: the 10K subset, split 85/5/10.
  const auto sub_i = pick(dir / "mnist10k", "images-idx3-ubyte"), sub_l = pick(dir / "mnist10k", "labels-idx1-ubyte");
  if (sub_i && sub_l) {
    const Dataset all = load_mnist_idx(*sub_i, *sub_l);
    const std::size_t n_test = all.size() / 10, n_val = all.size() / 20;
    return split(all, all.size() - n_test - n_val, n_val, n_test, seed);
  }
  return std::nullopt;
}

Splits split(const Dataset& all, std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t seed) {
  if (n_train + n_val + n_test > all.size()) throw Error("split sizes exceed dataset size");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto take = [&](std::size_t b, std::size_t e) { return all.gather(std::span<const std::size_t>(idx.data() + b, e - b)); };
  Splits s;
  s.train = take(0, n_train);
  s.val = take(n_train, n_train + n_val);
  if (n_test) s.test = take(n_train + n_val, n_train + n_val + n_test);
  return s;
}

Dataset as_autoencoder(const Dataset& images) {
  const std::size_t n = images.size();
  Tensor flat = images.x.reshaped({n, images.x.size() / std::max<std::size_t>(n, 1)});
  return {flat, flat};
}

MinMaxScaler MinMaxScaler::fit(const Tensor& x) {
  const std::size_t n = x.dim(0), d = x.size() / n;
  MinMaxScaler s{std::vector<double>(d, INFINITY), std::vector<double>(d, -INFINITY)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      s.lo[j] = std::min(s.lo[j], x[i * d + j]);
      s.hi[j] = std::max(s.hi[j], x[i * d + j]);
    }
  return s;
}

Tensor MinMaxScaler::apply(const Tensor& x) const {
  Tensor out = x;
  const std::size_t d = lo.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t j = i % d;
    const double range = hi[j] - lo[j];
    out[i] = range > 0 ? (x[i] - lo[j]) / range : 0.0;
  }
  return out;
}

Splits load_egss_csv(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  auto fields = [](const std::string& line) {
    std::string l = line;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    Tok tok(l);
    return std::vector<std::string>(tok.begin(), tok.end());
  };
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 0);
  const auto header = fields(line);
  std::vector<std::size_t> cols;
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(path.string() + ": missing column '" + name + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const auto& name : kEgssPredictors) cols.push_back(find_col(name));
  find_col("stab");
  const std::size_t label_col = find_col("stabf");

  std::vector<double> xs, ys;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = fields(line);
    if (f.size() != header.size()) throw ParseError(path.string() + ": wrong field count", row);
    for (std::size_t c : cols) {
      char* end = nullptr;
      const double v = std::strtod(f[c].c_str(), &end);
      if (f[c].empty() || end != f[c].c_str() + f[c].size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ": non-numeric cell '" + f[c] + "' in column " + header[c], row);
      }
      xs.push_back(v);
    }
    if (f[label_col] == "stable") {
      ys.insert(ys.end(), {0.0, 1.0});
    } else if (f[label_col] == "unstable") {
      ys.insert(ys.end(), {1.0, 0.0});
    } else {
      throw ParseError(path.string() + ": stabf must be stable/unstable, got '" + f[label_col] + "'", row);
    }
  }
  const std::size_t n = ys.size() / 2;
  if (n == 0) throw ParseError(path.string() + ": no data rows", row);
  const Dataset all{Tensor({n, 12}, std::move(xs)), Tensor({n, 2}, std::move(ys))};
  const std::size_t n_train = n == 10000 ? 8550 : static_cast<std::size_t>(std::llround(0.855 * static_cast<double>(n)));
  const std::size_t n_val = n == 10000 ? 450 : static_cast<std::size_t>(std::llround(0.045 * static_cast<double>(n)));
  Splits s = split(all, n_train, n_val, n - n_train - n_val, seed);
  const MinMaxScaler scaler = MinMaxScaler::fit(s.train.x);
  s.train.x = scaler.apply(s.train.x);
  s.val.x = scaler.apply(s.val.x);
  if (s.test.size()) s.test.x = scaler.apply(s.test.x);
  return s;
}

std::optional<Synthetic> synthetic_from_string(const std::string& s) {
  if (s == "xor") return Synthetic::Xor;
  if (s == "linear") return Synthetic::Linear;
  if (s == "blobs") return Synthetic::Blobs;
  if (s == "mnist_like") return Synthetic::MnistLike;
  return std::nullopt;
}

Dataset synthetic(Synthetic kind, std::size_t n, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (kind) {
    case Synthetic::Xor: {
      Dataset d{Tensor({n, 2}), Tensor({n, 1})};
      for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i & 1), b = static_cast<double>((i >> 1) & 1);
        d.x.at(i, 0) = a + noise * gauss(rng);
        d.x.at(i, 1) = b + noise * gauss(rng);
        d.y[i] = (i & 1) ^ ((i >> 1) & 1);
      }
      return d;
    }
    case Synthetic::Linear: {
      Dataset d{Tensor({n, 1}), Tensor({n, 1})};
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        d.x[i] = u(rng);
        d.y[i] = 2.0 * d.x[i] + 1.0 + noise * gauss(rng);
      }
      return d;
    }
    case Synthetic::Blobs: {
      constexpr double centres[3][2] = {{-1.0, 0.0}, {1.0, 0.0}, {0.0, 1.5}};
      Dataset d{Tensor({n, 2}), Tensor({n, 3})};
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 3;
        d.x.at(i, 0) = centres[c][0] + 0.3 * gauss(rng);
        d.x.at(i, 1) = centres[c][1] + 0.3 * gauss(rng);
        d.y.at(i, c) = 1.0;
      }
      return d;
    }
    case Synthetic::MnistLike: {
      // Prototypes come from a fixed generator so every seed shares the classes.
      std::mt19937_64 proto_rng(20231029);
      std::uniform_int_distribution<int> coord(6, 21);
      std::vector<std::array<double, 784>> protos(10);
      for (auto& p : protos) {
        p.fill(0.0);
        for (int stroke = 0; stroke < 3; ++stroke) {
          const int r0 = coord(proto_rng), c0 = coord(proto_rng), r1 = coord(proto_rng), c1 = coord(proto_rng);
          for (int t = 0; t <= 20; ++t) {
            const int r = r0 + (r1 - r0) * t / 20, c = c0 + (c1 - c0) * t / 20;
            for (int dr = 0; dr < 2; ++dr)
              for (int dc = 0; dc < 2; ++dc) p[static_cast<std::size_t>((r + dr) * 28 + c + dc)] = 1.0;
          }
        }
      }
      std::uniform_int_distribution<int> shift(-2, 2);
      const double sd = noise > 0 ? noise : 0.1;
      Dataset d{Tensor({n, 28, 28, 1}), Tensor({n, 10})};
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 10;
        const int dr = shift(rng), dc = shift(rng);
        for (int r = 0; r < 28; ++r)
          for (int col = 0; col < 28; ++col) {
            const int sr = r - dr, sc = col - dc;
            double v = (sr >= 0 && sr < 28 && sc >= 0 && sc < 28) ? protos[c][static_cast<std::size_t>(sr * 28 + sc)] : 0.0;
            v += sd * gauss(rng);
            d.x[i * 784 + static_cast<std::size_t>(r * 28 + col)] = std::clamp(v, 0.0, 1.0);
          }
        d.y.at(i, c) = 1.0;
      }
      return d;
    }
  }
  throw Error("unknown synthetic kind");
}

}  // namespace mofhei::data
