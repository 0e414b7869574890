// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#include "mofhei/hesim.hpp"

#include <algorithm>
#include <atomic>
#include <nlohmann/json.hpp>
#include <string>

#include "mofhei/error.hpp"

namespace mofhei::he {

namespace {

std::atomic<std::uint64_t> next_id{1};

bool is_mul(OpKind k) { return k == OpKind::CtPtMul || k == OpKind::CtCtMul; }

}  // namespace

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::CtPtMul: return "ct_pt_mul";
    case OpKind::CtCtMul: return "ct_ct_mul";
    case OpKind::CtAdd: return "ct_add";
    case OpKind::CtPtAdd: return "ct_pt_add";
  }
  return "?";
}

int derived_max_depth(int cm_bits, int limb_bits, int scale_bits) {
  if (scale_bits <= 0) throw ConfigError("scale_bits must be positive");
  return (cm_bits - 2 * limb_bits) / scale_bits;
}

int PackingConfig::depth() const {
  return max_depth > 0 ? max_depth : derived_max_depth(cm_bits, limb_bits, scale_bits);
}

PackingConfig PackingConfig::resolved() const {
  PackingConfig c = *this;
  c.slot_count = slots();
  c.max_depth = depth();
  c.validate();
  return c;
}

void PackingConfig::validate() const {
  if (pmd == 0 || (pmd & (pmd - 1)) != 0) throw ConfigError("pmd must be a power of two");
  if (slots() == 0 || slots() > pmd / 2) throw ConfigError("slot count must be in [1, pmd/2]");
  if (limb_bits <= 0 || scale_bits <= 0) throw ConfigError("limb_bits and scale_bits must be positive");
  const int l = depth();
  if (l < 1) throw ConfigError("max_depth must be >= 1 (cm_bits too small?)");
  if (cm_bits < 2 * limb_bits + l * scale_bits) {
    throw ConfigError("cm_bits = " + std::to_string(cm_bits) + " cannot hold depth " + std::to_string(l) +
                      " (needs " + std::to_string(2 * limb_bits + l * scale_bits) + ")");
  }
}

std::uint64_t PackingConfig::ciphertext_bytes(int level) const {
  return 2ULL * pmd * limbs(level) * 8ULL;
}

std::uint64_t PackingConfig::plaintext_bytes(int level) const { return 1ULL * pmd * limbs(level) * 8ULL; }

PackedVec::PackedVec(VecKind kind, std::vector<double> slots, int level, bool is_zero)
    : kind_(kind),
      slots_(std::make_shared<const std::vector<double>>(std::move(slots))),
      level_(level),
      id_(next_id.fetch_add(1, std::memory_order_relaxed)),
      is_zero_(is_zero) {}

OpCounters& OpCounters::merge(const OpCounters& o) {
  ct_pt_mul += o.ct_pt_mul;
  ct_ct_mul += o.ct_ct_mul;
  ct_add += o.ct_add;
  ct_pt_add += o.ct_pt_add;
  skipped_mul += o.skipped_mul;
  skipped_add += o.skipped_add;
  peak_live_bytes = std::max(peak_live_bytes, o.peak_live_bytes);
  return *this;
}

nlohmann::json OpCounters::to_json() const {
  return {{"ct_pt_mul", ct_pt_mul},     {"ct_ct_mul", ct_ct_mul},     {"ct_add", ct_add},
          {"ct_pt_add", ct_pt_add},     {"skipped_mul", skipped_mul}, {"skipped_add", skipped_add},
          {"total", total()},           {"peak_live_bytes", peak_live_bytes}};
}

std::vector<PackedVec> batch_pack(const Tensor& batch, const PackingConfig& cfg) {
  if (batch.rank() < 1) throw ShapeError("batch_pack: need a batch dimension");
  const std::size_t n = batch.dim(0);
  const std::size_t b = cfg.slots();
  if (n > b) {
    throw CapacityError("batch of " + std::to_string(n) + " instances exceeds " + std::to_string(b) + " slots");
  }
  const std::size_t m = n ? batch.size() / n : 0;
  std::vector<PackedVec> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> s(b, 0.0);
    for (std::size_t j = 0; j < n; ++j) s[j] = batch[j * m + i];
    out.emplace_back(VecKind::Ciphertext, std::move(s), cfg.depth());
  }
  return out;
}

Tensor batch_unpack(std::span<const PackedVec> cts, std::size_t n) {
  Tensor out({n, cts.size()});
  for (std::size_t i = 0; i < cts.size(); ++i) {
    if (cts[i].size() < n) throw CapacityError("batch_unpack: ciphertext has fewer than n slots");
    for (std::size_t j = 0; j < n; ++j) out[j * cts.size() + i] = cts[i].slots()[j];
  }
  return out;
}

PackedVec encode_scalar(double w, const PackingConfig& cfg) {
  return PackedVec(VecKind::Plaintext, std::vector<double>(cfg.slots(), w), cfg.depth(), w == 0.0);
}

PackedVec zero_ciphertext(const PackingConfig& cfg, int level) {
  return PackedVec(VecKind::Ciphertext, std::vector<double>(cfg.slots(), 0.0), level, true);
}

PackedVec simd_op(OpKind kind, const PackedVec& a, const PackedVec& b, OpCounters& counters, const PackingConfig& cfg,
                  const char* context) {
  const bool b_ct = kind == OpKind::CtCtMul || kind == OpKind::CtAdd;
  if (!a.is_ciphertext() || b.is_ciphertext() != b_ct) {
    throw Error(std::string(to_string(kind)) + ": operand kinds do not match the op");
  }
  if (a.size() != b.size()) throw ShapeError(std::string(to_string(kind)) + ": slot counts differ");
  int level = b_ct ? std::min(a.level(), b.level()) : a.level();
  if (is_mul(kind)) {
    if (level < 1) {
      throw DepthBudgetError(std::string(to_string(kind)) + " on a ciphertext with no levels left" +
                             (context ? std::string(" in ") + context : std::string()));
    }
    --level;
  }
  const auto& x = a.slots();
  const auto& y = b.slots();
  std::vector<double> r(x.size());
  if (is_mul(kind)) {
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] * y[i];
  } else {
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] + y[i];
  }
  if (cfg.noise) cfg.noise(kind, r);
  switch (kind) {
    case OpKind::CtPtMul: ++counters.ct_pt_mul; break;
    case OpKind::CtCtMul: ++counters.ct_ct_mul; break;
    case OpKind::CtAdd: ++counters.ct_add; break;
    case OpKind::CtPtAdd: ++counters.ct_pt_add; break;
  }
  return PackedVec(VecKind::Ciphertext, std::move(r), level);
}

std::uint64_t memory_snapshot(std::span<const PackedVec> live, const PackingConfig& cfg) {
  std::uint64_t bytes = 0;
  for (const auto& v : live)
    bytes += v.is_ciphertext() ? cfg.ciphertext_bytes(v.level()) : cfg.plaintext_bytes(v.level());
  return bytes;
}

}  // namespace mofhei::he
