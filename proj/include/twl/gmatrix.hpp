// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "twl/prf.hpp"

namespace twl {

/// T x m matrix of g-values recomputed from a token sequence; the detection-side
/// evidence for both score functions.
struct GMatrix {
    std::vector<double> values;  // row-major [T x m]
    size_t T = 0;
    size_t m = 0;
    GSpec gspec;

    double at(size_t t, size_t layer) const { return values[t * m + layer]; }
};

/// Detection-side recomputation: entry (t, l) = g_value(seed before position t,
/// l, tokens[t]). `vocab` fixes the padding token id (= vocab) for positions
/// before the text start; a known context prefix (e.g. the prompt) can be
/// supplied instead of padding.
GMatrix recompute_g_matrix(std::span<const TokenId> tokens, const SecretKey& key, uint32_t m,
                           uint32_t H, const GSpec& gspec, size_t vocab,
                           std::span<const TokenId> prefix = {});

}  // namespace twl
