// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/prf.hpp"

#include <cctype>
#include <cstdio>

namespace twl {

SecretKey SecretKey::from_hex(const std::string& hex) {
    std::string s = hex;
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) s = s.substr(2);
    if (s.size() != 32) throw ParamError("key: expected 32 hex digits, got '" + hex + "'");
    for (char c : s) {
        if (!std::isxdigit(static_cast<unsigned char>(c)))
            throw ParamError("key: non-hex digit in '" + hex + "'");
    }
    SecretKey k;
    k.hi = std::stoull(s.substr(0, 16), nullptr, 16);
    k.lo = std::stoull(s.substr(16, 16), nullptr, 16);
    return k;
}

std::string SecretKey::to_hex() const {
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

GSpec GSpec::bernoulli(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ParamError("gspec.p: bernoulli requires 0 < p < 1");
    return GSpec{Family::bernoulli, p};
}

GSpec GSpec::uniform() { return GSpec{Family::uniform, 0.0}; }

std::string GSpec::name() const {
    return is_bernoulli() ? "bernoulli" : "uniform";
}

Seed derive_seed(std::span<const TokenId> window, const SecretKey& key) {
    uint64_t s = prf::fmix64(prf::kTagSeed ^ key.hi);
    s = prf::fmix64(s ^ key.lo);
    uint64_t pos = 1;
    for (TokenId tok : window) {
        s = prf::fmix64(s ^ (static_cast<uint64_t>(tok) + prf::kGamma * pos));
        ++pos;
    }
    return s;
}

double g_value(Seed seed, uint32_t layer, TokenId token, const GSpec& spec) {
    const double u = prf::u01_from_hash(prf::g_hash(seed, layer, token));
    if (spec.is_bernoulli()) return u < spec.p ? 1.0 : 0.0;
    return u;
}

bool tie_break_bit(Seed seed, uint32_t layer, uint64_t match_index) {
    const uint64_t h = prf::fmix64(prf::lane_key(seed, layer, prf::kTagTie) ^ (match_index * prf::kTokenMul));
    return (h >> 63) != 0;
}

std::vector<std::string> prf_test_vectors() {
    std::vector<std::string> out;
    char line[256];
    const SecretKey keys[2] = {SecretKey{0x0123456789ABCDEFULL, 0xFEDCBA9876543210ULL},
                               SecretKey{0xD00DF00DCAFEBEEFULL, 0x0000000000000001ULL}};
    for (const auto& key : keys) {
        const std::vector<std::vector<TokenId>> windows = {
            {0, 0, 0, 0}, {1, 2, 3, 4}, {1000, 1000, 1000, 7}, {42}};
        for (const auto& w : windows) {
            Seed s = derive_seed(w, key);
            std::string toks;
            for (size_t i = 0; i < w.size(); ++i) toks += (i ? "," : "") + std::to_string(w[i]);
            std::snprintf(line, sizeof(line), "seed %s %s -> %016llx", key.to_hex().c_str(),
                          toks.c_str(), static_cast<unsigned long long>(s));
            out.push_back(line);
        }
    }
    const Seed seeds[2] = {0x0000000000000000ULL, 0x1B873593CC9E2D51ULL};
    for (Seed s : seeds) {
        for (uint32_t layer : {1u, 2u, 30u}) {
            for (TokenId tok : {0u, 1u, 999u}) {
                std::snprintf(line, sizeof(line), "ghash %016llx %u %u -> %016llx",
                              static_cast<unsigned long long>(s), layer, tok,
                              static_cast<unsigned long long>(prf::g_hash(s, layer, tok)));
                out.push_back(line);
            }
            std::snprintf(line, sizeof(line), "tie %016llx %u 0 -> %d",
                          static_cast<unsigned long long>(s), layer,
                          tie_break_bit(s, layer, 0) ? 1 : 0);
            out.push_back(line);
        }
    }
    return out;
}

}  // namespace twl
