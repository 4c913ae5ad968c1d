// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twl/gmatrix.hpp"
#include "twl/langmodel.hpp"
#include "twl/tournament.hpp"

namespace twl {

/// Per-layer (optionally per-position) collision probabilities C_{t,l} with
/// standard errors. Layers are 1-based in all reports.
struct CollisionProfile {
    std::vector<double> mean;    // per-layer mean C_l, l = 1..m
    std::vector<double> se;      // standard error per layer (0 for exact profiles)
    size_t n_samples = 0;        // (text, position) samples behind each layer mean
    size_t n_positions = 0;      // text length T the profile describes
    std::vector<double> per_position;  // row-major [T x m] means; empty unless recorded

    size_t layers() const { return mean.size(); }
    bool has_per_position() const { return !per_position.empty(); }
    std::string to_csv() const;   // columns: t,layer,C,stderr (t = -1 for collapsed rows)
    std::string to_json() const;
};

/// C_p = sum_i p_i^2 (probability that two iid draws coincide).
double collision_probability(const TokenDistribution& dist);

/// Exact per-layer expected entrant collision probabilities C_1..C_m for an iid
/// model: C_1 is the base collision and C_{l+1} averages the collision of the
/// realized layer-l winner distribution over all layer-l g-assignments.
/// Enumeration work grows as (2^N)^(m-1) (Bernoulli) or (N!)^(m-1) (Uniform);
/// a CapacityError directs callers to layer_collisions_mc beyond the budget.
std::vector<double> layer_collisions_exact(const TokenDistribution& dist, uint32_t m,
                                           const GSpec& gspec);

/// Monte Carlo collision profile from generation traces: realized entrant
/// collisions recorded by the sampler, averaged over texts (exact conditional
/// collisions, so no pairing noise is added on top of seed randomness).
CollisionProfile layer_collisions_mc(const SequenceModel& model, const TournamentConfig& cfg,
                                     size_t n_texts, size_t T, uint64_t master_seed,
                                     bool per_position = false);

/// Detector-side trained collision estimates.
struct ChatEstimate {
    std::vector<double> chat;  // per-layer, clamped to [0,1]
    size_t n_train = 0;
};

/// Moment-matching estimator from watermarked training texts: inverts the
/// watermarked g-value mean per layer (for Bernoulli(p): E[g|w] = p + p(1-p)(1-C);
/// for Uniform: E[g|w] = (4-C)/6) and clamps to [0,1].
ChatEstimate estimate_chat(std::span<const GMatrix> train, const GSpec& gspec);

/// Single-layer watermarked g-value distribution at collision probability C:
/// F_gw(g) = C F_g(g) + (1-C) F_g(g)^2.
struct WatermarkedGDist {
    GSpec gspec;
    double C = 0.0;

    WatermarkedGDist(const GSpec& spec, double collision);

    double pmf_one() const;       // Bernoulli: P(g = 1) = p + p(1-p)(1-C)
    double pdf(double g) const;   // Uniform density: C + 2(1-C)g
    double cdf(double g) const;
    double mean() const;
};

/// Smallest layer l with min_t C_{t,l} >= 1 - delta; nullopt if never reached.
std::optional<uint32_t> detect_M(const CollisionProfile& profile, double delta);

/// Pool-adjacent-violators projection onto non-decreasing sequences (used to
/// feed noisy measured profiles into the closed-form curve, which requires
/// monotone C).
std::vector<double> isotonic_non_decreasing(std::vector<double> v);

}  // namespace twl
