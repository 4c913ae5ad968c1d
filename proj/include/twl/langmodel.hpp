// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "twl/prf.hpp"

namespace twl {

/// Probability vector over a finite vocabulary; the synthetic stand-in for the
/// next-token distribution of a language model.
struct TokenDistribution {
    std::vector<double> probs;

    size_t vocab() const { return probs.size(); }

    /// Throws ParamError unless entries are >= 0, N >= 2 and the sum is 1 within 1e-12.
    void validate() const;

    double entropy() const;                // Shannon entropy in nats, 0*ln(0) = 0
    double collision_probability() const;  // sum of squared probabilities
};

enum class DistKind { uniform, zipf, two_point, explicit_probs };

struct DistParams {
    double zipf_s = 1.0;       // zipf exponent, > 0
    double two_point_q = 0.5;  // mass on token 0, in (0,1)
    std::vector<double> probs; // explicit_probs
};

TokenDistribution make_distribution(DistKind kind, size_t n, const DistParams& params = {});

/// Inverse-CDF sampler over a fixed distribution (64-bit uniform fraction).
class CdfSampler {
public:
    explicit CdfSampler(const TokenDistribution& dist);
    TokenId sample(CounterRng& rng) const;

private:
    std::vector<double> cum_;
};

TokenId sample_token(const TokenDistribution& dist, CounterRng& rng);

/// Synthetic sequence model: iid draws from a base distribution or a first-order
/// Markov chain. Temperature rescales probabilities as p^(1/temperature) with
/// renormalization (applied once at construction).
class SequenceModel {
public:
    static SequenceModel iid(TokenDistribution base, double temperature = 1.0);
    /// rows[i] is the next-token distribution after token i; the first position
    /// uses a uniform distribution.
    static SequenceModel markov(std::vector<TokenDistribution> rows, double temperature = 1.0);

    const TokenDistribution& next(std::optional<TokenId> context) const;
    size_t vocab() const { return base_.vocab(); }
    bool is_iid() const { return rows_.empty(); }

private:
    TokenDistribution base_;
    std::vector<TokenDistribution> rows_;
};

/// Plain (unwatermarked) sequence of `len` tokens, e.g. prompt material.
std::vector<TokenId> sample_prompt(const SequenceModel& model, size_t len, CounterRng& rng);

}  // namespace twl
