// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "twl/langmodel.hpp"
#include "twl/prf.hpp"

namespace twl {

struct TournamentConfig {
    uint32_t m = 30;  // tournament layers; 2^m candidates
    GSpec gspec;
    uint32_t H = 4;  // seed context window length
    SecretKey key;

    void validate() const;  // m <= 30, H >= 1
};

/// Generated token sequence plus the per-position seeds used to watermark it.
struct WatermarkedText {
    std::vector<TokenId> tokens;
    std::vector<Seed> seeds;
};

/// One knockout layer applied to the candidate-entrant distribution, given the
/// g-value of every token. Pair winners keep the larger g; ties split mass evenly.
/// This is the exact marginal of the pairwise match over two iid entrants.
void winner_map_layer(std::span<double> dist, std::span<const double> g);

/// Tournament sampler over the full candidate tree, simulated through the
/// per-layer winner-distribution composition: with the layer g-assignments fixed
/// by the seed, the knockout winner of 2^m iid candidates is one draw from the
/// m-fold composed winner distribution, so the sample is distributionally exact
/// at any m without materializing 2^m candidates.
class TournamentSampler {
public:
    TournamentSampler(const SequenceModel& model, const TournamentConfig& cfg);

    /// Samples the next token. If `entrant_collisions` is non-null it receives m
    /// values: the realized collision probability of the distribution entering
    /// each layer (Def. of C_{t,l} used throughout detection theory).
    TokenId sample(Seed seed, std::optional<TokenId> ctx, CounterRng& rng,
                   double* entrant_collisions = nullptr);

    /// Composed winner distribution for one position (marginal over candidate
    /// draws, conditional on the seed).
    const std::vector<double>& winner_dist(Seed seed, std::optional<TokenId> ctx,
                                           double* entrant_collisions = nullptr);

private:
    const SequenceModel* model_;
    TournamentConfig cfg_;
    std::vector<double> d_, g_, cum_;
    std::vector<uint32_t> order_;
};

/// Literal knockout over 2^m explicitly sampled candidates (testing/cross-check
/// route; distributionally identical to TournamentSampler once seeds are
/// marginalized). Capacity-limited to m <= 20.
TokenId tournament_sample_explicit(const TokenDistribution& dist, Seed seed,
                                   const TournamentConfig& cfg, CounterRng& rng);

struct GenerationResult {
    WatermarkedText text;
    /// Row-major [T x m] realized entrant collisions; empty unless requested.
    std::vector<double> collisions;
};

/// Iterates the sampler over T positions with a sliding H-token seed window,
/// padded at the start with the reserved padding id (= vocabulary size). An
/// optional prompt pre-fills the window (and the Markov context) without being
/// part of the output.
GenerationResult generate_text(const SequenceModel& model, const TournamentConfig& cfg, size_t T,
                               CounterRng& rng, bool record_collisions = false,
                               std::span<const TokenId> prompt = {});

// ---- Layer inflation attack ----

struct AttackConfig {
    // Attack g-values are negated occurrence counts. With initial_pool the
    // counts are taken over the full 2^N pool, which makes the knockout pick
    // exactly the least-frequent observed token; per_layer recounts over each
    // round's survivors, which collapses late rounds into count ties and loses
    // most of the signal (kept for comparison experiments).
    enum class CountMode { initial_pool, per_layer };

    uint32_t n_attack_layers = 10;  // appended knockout depth; 2^N black-box calls per token
    CountMode count_mode = CountMode::initial_pool;

    void validate() const;  // 1 <= n_attack_layers <= 20
};

/// Attack g-value: negated occurrence count of `token` among the observed
/// tokens of one attack layer. Throws ParamError if the token is absent.
double attack_g(std::span<const TokenId> observed, TokenId token);

/// Collects 2^N black-box outputs for one position and runs an N-layer knockout
/// favouring rare tokens (larger attack_g wins; equal counts fall to
/// tie_break_bit keyed by an attacker-local seed drawn from `rng`).
TokenId inflate_attack_sample(const std::function<TokenId()>& blackbox, const AttackConfig& atk,
                              CounterRng& rng);

/// Full attacked generation: at every position the watermarked sampler is the
/// black box (fresh candidate randomness per call, seeds derived from the
/// attacked prefix) and the attack picks the final token.
WatermarkedText generate_attacked_text(const SequenceModel& model, const TournamentConfig& cfg,
                                       const AttackConfig& atk, size_t T, CounterRng& rng,
                                       std::span<const TokenId> prompt = {});

}  // namespace twl
