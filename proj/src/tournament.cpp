// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/tournament.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "twl/error.hpp"
#include "twl/kernels.hpp"

namespace twl {

void TournamentConfig::validate() const {
    // 2^m candidates are never materialized (the sampler composes winner
    // distributions), so only an anti-footgun bound applies here; the explicit
    // route enforces its own m <= 20 materialization cap.
    if (m > 4096) throw ParamError("tournament.m: layer count must be <= 4096");
    if (H < 1) throw ParamError("tournament.H: window length must be >= 1");
    if (gspec.is_bernoulli() && !(gspec.p > 0.0 && gspec.p < 1.0))
        throw ParamError("gspec.p: bernoulli requires 0 < p < 1");
}

void winner_map_layer(std::span<double> dist, std::span<const double> g) {
    const size_t n = dist.size();
    if (g.size() != n) throw ParamError("winner_map_layer: g size mismatch");
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) { return g[a] < g[b]; });
    // Tokens with strictly smaller g lose; equal-g runs split their matches evenly.
    // For token x in a run of total mass R with mass B strictly below:
    //   w(x) = d(x)^2 + 2 d(x) [B + (R - d(x))/2] = d(x) (2B + R).
    double below = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        double run_mass = 0.0;
        while (j < n && g[order[j]] == g[order[i]]) run_mass += dist[order[j++]];
        const double factor = 2.0 * below + run_mass;
        for (size_t k = i; k < j; ++k) dist[order[k]] *= factor;
        below += run_mass;
        i = j;
    }
}

TournamentSampler::TournamentSampler(const SequenceModel& model, const TournamentConfig& cfg)
    : model_(&model), cfg_(cfg) {
    cfg_.validate();
    const size_t n = model.vocab();
    d_.resize(n);
    g_.resize(n);
    cum_.resize(n);
    order_.resize(n);
}

const std::vector<double>& TournamentSampler::winner_dist(Seed seed, std::optional<TokenId> ctx,
                                                          double* entrant_collisions) {
    const auto& kern = kernels::active();
    const TokenDistribution& base = model_->next(ctx);
    const size_t n = base.probs.size();
    std::copy(base.probs.begin(), base.probs.end(), d_.begin());

    double entrant_c = entrant_collisions ? kern.sumsq(d_.data(), n) : 0.0;
    for (uint32_t layer = 1; layer <= cfg_.m; ++layer) {
        if (entrant_collisions) entrant_collisions[layer - 1] = entrant_c;
        const uint64_t lane = prf::lane_key(seed, layer, prf::kTagG);
        if (cfg_.gspec.is_bernoulli()) {
            kern.g_row_bernoulli(lane, 0, n, cfg_.gspec.p, g_.data());
            const double sigma = kern.dot(d_.data(), g_.data(), n);
            entrant_c = kern.update_and_sumsq(d_.data(), g_.data(), n, 1.0 - sigma);
        } else {
            kern.g_row_uniform(lane, 0, n, g_.data());
            winner_map_layer(std::span<double>(d_.data(), n), std::span<const double>(g_.data(), n));
            if (entrant_collisions) entrant_c = kern.sumsq(d_.data(), n);
        }
    }
    return d_;
}

TokenId TournamentSampler::sample(Seed seed, std::optional<TokenId> ctx, CounterRng& rng,
                                  double* entrant_collisions) {
    const auto& w = winner_dist(seed, ctx, entrant_collisions);
    const size_t n = w.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += w[i];
        cum_[i] = acc;
    }
    const double u = rng.next_u01() * acc;  // acc == 1 up to roundoff
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    return static_cast<TokenId>(std::min<size_t>(it - cum_.begin(), n - 1));
}

TokenId tournament_sample_explicit(const TokenDistribution& dist, Seed seed,
                                   const TournamentConfig& cfg, CounterRng& rng) {
    cfg.validate();
    if (cfg.m > 20)
        throw CapacityError("tournament_sample_explicit: m > 20 would materialize > 2^20 candidates; "
                            "use the marginal sampler");
    const CdfSampler sampler(dist);
    std::vector<TokenId> entrants(size_t{1} << cfg.m);
    for (auto& t : entrants) t = sampler.sample(rng);
    std::vector<TokenId> next(entrants.size() / 2);
    for (uint32_t layer = 1; layer <= cfg.m; ++layer) {
        next.resize(entrants.size() / 2);
        for (size_t j = 0; j < next.size(); ++j) {
            const TokenId a = entrants[2 * j], b = entrants[2 * j + 1];
            if (a == b) {
                next[j] = a;
                continue;
            }
            const double ga = g_value(seed, layer, a, cfg.gspec);
            const double gb = g_value(seed, layer, b, cfg.gspec);
            if (ga > gb)
                next[j] = a;
            else if (gb > ga)
                next[j] = b;
            else
                next[j] = tie_break_bit(seed, layer, j) ? b : a;
        }
        entrants.swap(next);
    }
    return entrants[0];
}

namespace {

class SeedWindow {
public:
    SeedWindow(uint32_t h, TokenId pad) : window_(h, pad) {}

    Seed derive(const SecretKey& key) const { return derive_seed(window_, key); }

    void push(TokenId t) {
        window_.erase(window_.begin());
        window_.push_back(t);
    }

private:
    std::vector<TokenId> window_;
};

}  // namespace

GenerationResult generate_text(const SequenceModel& model, const TournamentConfig& cfg, size_t T,
                               CounterRng& rng, bool record_collisions,
                               std::span<const TokenId> prompt) {
    if (T < 1) throw ParamError("generate_text.T: length must be >= 1");
    GenerationResult out;
    out.text.tokens.reserve(T);
    out.text.seeds.reserve(T);
    if (record_collisions) out.collisions.assign(T * cfg.m, 0.0);

    TournamentSampler sampler(model, cfg);
    SeedWindow window(cfg.H, static_cast<TokenId>(model.vocab()));
    std::optional<TokenId> ctx;
    for (TokenId t : prompt) {
        window.push(t);
        ctx = t;
    }
    for (size_t t = 0; t < T; ++t) {
        const Seed seed = window.derive(cfg.key);
        double* rec = record_collisions ? out.collisions.data() + t * cfg.m : nullptr;
        const TokenId tok = sampler.sample(seed, ctx, rng, rec);
        out.text.tokens.push_back(tok);
        out.text.seeds.push_back(seed);
        window.push(tok);
        ctx = tok;
    }
    return out;
}

void AttackConfig::validate() const {
    if (n_attack_layers < 1 || n_attack_layers > 20)
        throw ParamError("attack.n_layers: must be in [1, 20]");
}

double attack_g(std::span<const TokenId> observed, TokenId token) {
    long count = 0;
    for (TokenId t : observed) count += (t == token);
    if (count == 0) throw ParamError("attack_g: token does not occur among observed tokens");
    return -static_cast<double>(count);
}

TokenId inflate_attack_sample(const std::function<TokenId()>& blackbox, const AttackConfig& atk,
                              CounterRng& rng) {
    atk.validate();
    std::vector<TokenId> entrants(size_t{1} << atk.n_attack_layers);
    for (auto& t : entrants) t = blackbox();
    const Seed tie_seed = rng.next_u64();  // attacker-local tie randomness

    std::unordered_map<TokenId, long> pool_counts;
    if (atk.count_mode == AttackConfig::CountMode::initial_pool)
        for (TokenId t : entrants) ++pool_counts[t];

    std::vector<TokenId> next;
    std::unordered_map<TokenId, long> layer_counts;
    for (uint32_t layer = 1; layer <= atk.n_attack_layers; ++layer) {
        const auto* counts = &pool_counts;
        if (atk.count_mode == AttackConfig::CountMode::per_layer) {
            layer_counts.clear();
            for (TokenId t : entrants) ++layer_counts[t];
            counts = &layer_counts;
        }
        next.resize(entrants.size() / 2);
        for (size_t j = 0; j < next.size(); ++j) {
            const TokenId a = entrants[2 * j], b = entrants[2 * j + 1];
            if (a == b) {
                next[j] = a;
                continue;
            }
            const long ca = counts->at(a), cb = counts->at(b);
            if (ca < cb)  // rarer token has larger attack g = -count
                next[j] = a;
            else if (cb < ca)
                next[j] = b;
            else
                next[j] = tie_break_bit(tie_seed, layer, j) ? b : a;
        }
        entrants.swap(next);
    }
    return entrants[0];
}

WatermarkedText generate_attacked_text(const SequenceModel& model, const TournamentConfig& cfg,
                                       const AttackConfig& atk, size_t T, CounterRng& rng,
                                       std::span<const TokenId> prompt) {
    if (T < 1) throw ParamError("generate_attacked_text.T: length must be >= 1");
    WatermarkedText out;
    out.tokens.reserve(T);
    out.seeds.reserve(T);

    TournamentSampler sampler(model, cfg);
    SeedWindow window(cfg.H, static_cast<TokenId>(model.vocab()));
    std::optional<TokenId> ctx;
    for (TokenId t : prompt) {
        window.push(t);
        ctx = t;
    }
    std::vector<double> cum(model.vocab());
    for (size_t t = 0; t < T; ++t) {
        const Seed seed = window.derive(cfg.key);
        // The per-call g-assignments are fixed by the seed, so every black-box
        // call at this position draws iid from the same composed winner
        // distribution; precompute it once and let calls differ only in the
        // candidate randomness.
        const auto& w = sampler.winner_dist(seed, ctx);
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            cum[i] = acc;
        }
        const auto blackbox = [&]() -> TokenId {
            const double u = rng.next_u01() * acc;
            const auto it = std::upper_bound(cum.begin(), cum.end(), u);
            return static_cast<TokenId>(std::min<size_t>(it - cum.begin(), cum.size() - 1));
        };
        const TokenId tok = inflate_attack_sample(blackbox, atk, rng);
        out.tokens.push_back(tok);
        out.seeds.push_back(seed);
        window.push(tok);
        ctx = tok;
    }
    return out;
}

}  // namespace twl
