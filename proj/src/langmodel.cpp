// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/langmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twl/error.hpp"

namespace twl {

void TokenDistribution::validate() const {
    if (probs.size() < 2) throw ParamError("distribution: vocabulary size must be >= 2");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw ParamError("distribution: negative or NaN probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ParamError("distribution: probabilities must sum to 1");
}

double TokenDistribution::entropy() const {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double TokenDistribution::collision_probability() const {
    double c = 0.0;
    for (double p : probs) c += p * p;
    return c;
}

TokenDistribution make_distribution(DistKind kind, size_t n, const DistParams& params) {
    if (kind != DistKind::explicit_probs && n < 2)
        throw ParamError("make_distribution.N: vocabulary size must be >= 2");
    TokenDistribution d;
    switch (kind) {
        case DistKind::uniform:
            d.probs.assign(n, 1.0 / static_cast<double>(n));
            break;
        case DistKind::zipf: {
            if (!(params.zipf_s > 0.0)) throw ParamError("make_distribution.zipf_s: exponent must be > 0");
            d.probs.resize(n);
            double sum = 0.0;
            for (size_t i = 0; i < n; ++i) {
                d.probs[i] = std::pow(static_cast<double>(i + 1), -params.zipf_s);
                sum += d.probs[i];
            }
            for (double& p : d.probs) p /= sum;
            break;
        }
        case DistKind::two_point: {
            const double q = params.two_point_q;
            if (!(q > 0.0 && q < 1.0)) throw ParamError("make_distribution.two_point_q: mass must be in (0,1)");
            d.probs.assign(n, (1.0 - q) / static_cast<double>(n - 1));
            d.probs[0] = q;
            break;
        }
        case DistKind::explicit_probs: {
            d.probs = params.probs;
            double sum = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
            if (d.probs.size() < 2 || sum <= 0.0)
                throw ParamError("make_distribution.probs: need >= 2 nonnegative entries");
            for (double& p : d.probs) p /= sum;
            break;
        }
    }
    d.validate();
    return d;
}

CdfSampler::CdfSampler(const TokenDistribution& dist) {
    cum_.resize(dist.probs.size());
    double acc = 0.0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs[i];
        cum_[i] = acc;
    }
    cum_.back() = 1.0;
}

TokenId CdfSampler::sample(CounterRng& rng) const {
    const double u = rng.next_u01();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    return static_cast<TokenId>(std::min<size_t>(it - cum_.begin(), cum_.size() - 1));
}

TokenId sample_token(const TokenDistribution& dist, CounterRng& rng) {
    return CdfSampler(dist).sample(rng);
}

std::vector<TokenId> sample_prompt(const SequenceModel& model, size_t len, CounterRng& rng) {
    std::vector<TokenId> prompt;
    prompt.reserve(len);
    std::optional<TokenId> ctx;
    for (size_t i = 0; i < len; ++i) {
        const TokenId t = sample_token(model.next(ctx), rng);
        prompt.push_back(t);
        ctx = t;
    }
    return prompt;
}

namespace {
TokenDistribution apply_temperature(TokenDistribution d, double temperature) {
    if (!(temperature > 0.0)) throw ParamError("model.temperature: must be > 0");
    if (temperature == 1.0) return d;
    const double inv = std::isinf(temperature) ? 0.0 : 1.0 / temperature;
    double sum = 0.0;
    for (double& p : d.probs) {
        p = p > 0.0 ? std::pow(p, inv) : 0.0;
        sum += p;
    }
    if (sum <= 0.0) throw ParamError("model.temperature: scaling produced an empty distribution");
    for (double& p : d.probs) p /= sum;
    return d;
}
}  // namespace

SequenceModel SequenceModel::iid(TokenDistribution base, double temperature) {
    SequenceModel m;
    m.base_ = apply_temperature(std::move(base), temperature);
    m.base_.validate();
    return m;
}

SequenceModel SequenceModel::markov(std::vector<TokenDistribution> rows, double temperature) {
    if (rows.size() < 2) throw ParamError("model.transition: need >= 2 rows");
    SequenceModel m;
    m.rows_.reserve(rows.size());
    for (auto& row : rows) {
        if (row.probs.size() != rows.size())
            throw ParamError("model.transition: matrix must be square");
        m.rows_.push_back(apply_temperature(std::move(row), temperature));
        m.rows_.back().validate();
    }
    m.base_ = make_distribution(DistKind::uniform, m.rows_.size());
    return m;
}

const TokenDistribution& SequenceModel::next(std::optional<TokenId> context) const {
    if (is_iid() || !context.has_value()) return base_;
    if (*context >= rows_.size()) throw ParamError("context: token id out of range");
    return rows_[*context];
}

}  // namespace twl
