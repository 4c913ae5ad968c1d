// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twl/error.hpp"

namespace twl {

/// 128-bit secret key shared by generation and detection.
struct SecretKey {
    uint64_t hi = 0;
    uint64_t lo = 0;

    bool operator==(const SecretKey&) const = default;

    /// Parses a 32-hex-digit key ("deadbeef..." with optional 0x prefix).
    static SecretKey from_hex(const std::string& hex);
    std::string to_hex() const;
};

using Seed = uint64_t;
using TokenId = uint32_t;

/// g-value distribution family (the carrier distribution of the watermark).
struct GSpec {
    enum class Family { bernoulli, uniform };

    Family family = Family::bernoulli;
    double p = 0.5;  // bernoulli success probability, unused for uniform

    static GSpec bernoulli(double p);
    static GSpec uniform();

    bool is_bernoulli() const { return family == Family::bernoulli; }
    std::string name() const;
};

namespace prf {

// splitmix64 finalizer: xor-shift-multiply avalanche stage. All keyed hashing in
// this project is built from chains of this mixer with frozen domain tags so the
// g-value streams are bit-reproducible across platforms.
inline uint64_t fmix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
inline constexpr uint64_t kTokenMul = 0xD6E8FEB86659FD93ULL;

// Domain separation tags (frozen; see data/prf_vectors.txt).
inline constexpr uint64_t kTagSeed = 0x5345454447454E31ULL;  // "SEEDGEN1"
inline constexpr uint64_t kTagG = 0x47564C4855453031ULL;     // g-values
inline constexpr uint64_t kTagTie = 0x54494542524B3031ULL;   // tie breaks
inline constexpr uint64_t kTagRng = 0x524E4753545231AAULL;   // sampling streams

/// Per-(seed, layer) hash lane; hoisted out of token loops.
inline uint64_t lane_key(Seed seed, uint32_t layer, uint64_t tag) {
    return fmix64(seed ^ tag ^ (kGamma * static_cast<uint64_t>(layer)));
}

/// Raw 64-bit hash for (seed, layer, token) in the g-value domain.
inline uint64_t g_hash(Seed seed, uint32_t layer, TokenId token) {
    return fmix64(lane_key(seed, layer, kTagG) ^ (static_cast<uint64_t>(token) * kTokenMul));
}

/// Uniform fraction in [0,1) from a raw hash (52-bit mantissa, exact in IEEE double).
inline double u01_from_hash(uint64_t h) {
    return static_cast<double>(h >> 12) * 0x1.0p-52;
}

}  // namespace prf

/// Seed derivation: r_t = h(window tokens, key). The window must have exactly H
/// entries; callers pad leading positions with the reserved padding token id.
Seed derive_seed(std::span<const TokenId> window, const SecretKey& key);

/// g-value for (seed, layer, token): inverse CDF of `spec` applied to the uniform
/// fraction of the keyed hash. Bernoulli yields 0.0/1.0, Uniform yields u in [0,1).
double g_value(Seed seed, uint32_t layer, TokenId token, const GSpec& spec);

/// Unbiased tie-break bit, domain-separated from the g-value stream.
bool tie_break_bit(Seed seed, uint32_t layer, uint64_t match_index);

/// Counter-mode deterministic random stream. Values depend only on
/// (master_seed, purpose, stream_index, counter), so per-text streams are
/// reproducible under any scheduling.
class CounterRng {
public:
    CounterRng(uint64_t master_seed, uint64_t purpose, uint64_t stream_index)
        : lane_(prf::fmix64(prf::fmix64(master_seed ^ prf::kTagRng ^ (prf::kGamma * purpose)) ^
                            (prf::kGamma * stream_index))) {}

    uint64_t next_u64() { return prf::fmix64(lane_ ^ (counter_++ * prf::kTokenMul)); }
    double next_u01() { return prf::u01_from_hash(next_u64()); }

private:
    uint64_t lane_;
    uint64_t counter_ = 0;
};

/// Purpose ids for deterministic stream derivation; combined with a per-text
/// index so adding texts never perturbs earlier streams.
namespace streams {
inline constexpr uint64_t kWatermarked = 1;
inline constexpr uint64_t kUnwatermarked = 2;
inline constexpr uint64_t kTrain = 3;
inline constexpr uint64_t kAttack = 4;
inline constexpr uint64_t kCollisionMc = 5;
inline constexpr uint64_t kMisc = 6;
}  // namespace streams

/// Frozen cross-platform test vectors ("kind inputs... -> output" per line).
std::vector<std::string> prf_test_vectors();

}  // namespace twl
