// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mofhei/tensor.hpp"

namespace mofhei::he {

enum class OpKind { CtPtMul, CtCtMul, CtAdd, CtPtAdd };
const char* to_string(OpKind k);

/// Optional perturbation applied to the slots of every op result. Off by default;
/// the simulator is otherwise exact.
using NoiseHook = std::function<void(OpKind, std::span<double>)>;

struct PackingConfig {
  std::size_t slot_count = 0;  // b; 0 means pmd / 2
  std::size_t pmd = 32768;
  int cm_bits = 860;
  int max_depth = 0;  // L; 0 derives it from cm_bits
  int limb_bits = 60;
  int scale_bits = 40;
  NoiseHook noise;

  /// Fills derived defaults and checks b <= pmd/2, L >= 1 and that the modulus
  /// chain (two special limbs plus one scale prime per level) fits in cm_bits.
  PackingConfig resolved() const;
  void validate() const;
  std::size_t slots() const { return slot_count ? slot_count : pmd / 2; }
  int depth() const;

  /// Limb count of a ciphertext at `level`.
  std::size_t limbs(int level) const { return static_cast<std::size_t>(level) + 2; }
  std::uint64_t ciphertext_bytes(int level) const;
  std::uint64_t plaintext_bytes(int level) const;
};

/// floor((cm_bits - 2 * limb_bits) / scale_bits).
int derived_max_depth(int cm_bits, int limb_bits, int scale_bits);

enum class VecKind { Ciphertext, Plaintext };

/// One simulated ciphertext or plaintext. Immutable once built; ops return new values.
class PackedVec {
 public:
  PackedVec(VecKind kind, std::vector<double> slots, int level, bool is_zero = false);

  VecKind kind() const { return kind_; }
  bool is_ciphertext() const { return kind_ == VecKind::Ciphertext; }
  const std::vector<double>& slots() const { return *slots_; }
  std::size_t size() const { return slots_->size(); }
  int level() const { return level_; }
  std::uint64_t id() const { return id_; }
  bool is_zero() const { return is_zero_; }

 private:
  VecKind kind_;
  std::shared_ptr<const std::vector<double>> slots_;
  int level_;
  std::uint64_t id_;
  bool is_zero_;
};

struct OpCounters {
  std::uint64_t ct_pt_mul = 0;
  std::uint64_t ct_ct_mul = 0;
  std::uint64_t ct_add = 0;
  std::uint64_t ct_pt_add = 0;
  std::uint64_t skipped_mul = 0;
  std::uint64_t skipped_add = 0;
  std::uint64_t peak_live_bytes = 0;

  std::uint64_t total() const { return ct_pt_mul + ct_ct_mul + ct_add + ct_pt_add; }
  std::uint64_t skipped() const { return skipped_mul + skipped_add; }
  /// Sums the op counts, keeps the larger peak.
  OpCounters& merge(const OpCounters& o);
  bool operator==(const OpCounters&) const = default;
  nlohmann::json to_json() const;
};

/// Instance j, feature i -> ciphertext i, slot j. Throws CapacityError when the
/// batch has more rows than the configured slot count.
std::vector<PackedVec> batch_pack(const Tensor& batch, const PackingConfig& cfg);
/// Inverse of batch_pack for the first n slots; returns (n, cts.size()).
Tensor batch_unpack(std::span<const PackedVec> cts, std::size_t n);

PackedVec encode_scalar(double w, const PackingConfig& cfg);
/// Fresh ciphertext at `level` holding zeros (used for convolution padding).
PackedVec zero_ciphertext(const PackingConfig& cfg, int level);

/// Slot-wise op; increments the matching counter by one. Multiplications need
/// every ciphertext operand at level >= 1 and drop the result one level below
/// the lowest operand. `context` names the caller in depth errors.
PackedVec simd_op(OpKind kind, const PackedVec& a, const PackedVec& b, OpCounters& counters,
                  const PackingConfig& cfg, const char* context = nullptr);

/// Bytes held by the ciphertexts and plaintexts in `live`.
std::uint64_t memory_snapshot(std::span<const PackedVec> live, const PackingConfig& cfg);

}  // namespace mofhei::he
