// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/collision.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "twl/error.hpp"
#include "twl/format.hpp"
#include "twl/kernels.hpp"

namespace twl {

double collision_probability(const TokenDistribution& dist) {
    dist.validate();
    return dist.collision_probability();
}

namespace {

constexpr double kExactWorkCap = double(1) * (1u << 31);  // leaf budget for enumeration

double sumsq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

std::vector<double> layer_collisions_exact(const TokenDistribution& dist, uint32_t m,
                                           const GSpec& gspec) {
    dist.validate();
    if (m < 1) throw ParamError("layer_collisions_exact.m: need m >= 1");
    const size_t n = dist.vocab();

    double branches;  // per-layer assignment count
    if (gspec.is_bernoulli()) {
        if (n > 12)
            throw CapacityError("layer_collisions_exact: Bernoulli enumeration needs N <= 12; "
                                "use layer_collisions_mc");
        branches = std::ldexp(1.0, static_cast<int>(n));
    } else {
        if (n > 8)
            throw CapacityError("layer_collisions_exact: Uniform enumeration needs N <= 8; "
                                "use layer_collisions_mc");
        branches = 1.0;
        for (size_t i = 2; i <= n; ++i) branches *= static_cast<double>(i);
    }
    if (std::pow(branches, static_cast<double>(m - 1)) > kExactWorkCap)
        throw CapacityError("layer_collisions_exact: enumeration exceeds work budget at m = " +
                            std::to_string(m) + "; use layer_collisions_mc");

    std::vector<double> C(m, 0.0);
    std::vector<std::vector<double>> buf(m + 1, std::vector<double>(n));
    buf[0].assign(dist.probs.begin(), dist.probs.end());

    std::vector<double> pow_p(n + 1, 1.0), pow_q(n + 1, 1.0);
    if (gspec.is_bernoulli()) {
        for (size_t k = 1; k <= n; ++k) {
            pow_p[k] = pow_p[k - 1] * gspec.p;
            pow_q[k] = pow_q[k - 1] * (1.0 - gspec.p);
        }
    }

    std::vector<uint32_t> perm(n);

    auto rec = [&](auto&& self, uint32_t layer, double weight) -> void {
        const auto& d = buf[layer - 1];
        C[layer - 1] += weight * sumsq(d);
        if (layer == m) return;
        auto& w = buf[layer];
        if (gspec.is_bernoulli()) {
            for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
                double sigma = 0.0;
                for (size_t i = 0; i < n; ++i)
                    if (mask & (uint64_t{1} << i)) sigma += d[i];
                for (size_t i = 0; i < n; ++i)
                    w[i] = d[i] * ((mask & (uint64_t{1} << i)) ? 2.0 - sigma : 1.0 - sigma);
                const int ones = std::popcount(mask);
                self(self, layer + 1, weight * pow_p[ones] * pow_q[n - ones]);
            }
        } else {
            std::iota(perm.begin(), perm.end(), 0u);
            double inv_fact = 1.0;
            for (size_t i = 2; i <= n; ++i) inv_fact /= static_cast<double>(i);
            std::vector<uint32_t> p = perm;
            do {
                double below = 0.0;
                for (size_t k = 0; k < n; ++k) {  // p[k] in ascending g order
                    w[p[k]] = d[p[k]] * (2.0 * below + d[p[k]]);
                    below += d[p[k]];
                }
                self(self, layer + 1, weight * inv_fact);
            } while (std::next_permutation(p.begin(), p.end()));
        }
    };
    rec(rec, 1, 1.0);
    return C;
}

CollisionProfile layer_collisions_mc(const SequenceModel& model, const TournamentConfig& cfg,
                                     size_t n_texts, size_t T, uint64_t master_seed,
                                     bool per_position) {
    if (n_texts < 100) throw ParamError("layer_collisions_mc.n_texts: need >= 100");
    if (cfg.m < 1) throw ParamError("layer_collisions_mc: config needs m >= 1");
    const size_t m = cfg.m;

    CollisionProfile prof;
    prof.mean.assign(m, 0.0);
    prof.se.assign(m, 0.0);
    std::vector<double> sum(m, 0.0), sum2(m, 0.0);
    prof.n_positions = T;
    if (per_position) prof.per_position.assign(T * m, 0.0);
    for (size_t i = 0; i < n_texts; ++i) {
        CounterRng rng(master_seed, streams::kCollisionMc, i);
        const GenerationResult gen = generate_text(model, cfg, T, rng, /*record=*/true);
        for (size_t t = 0; t < T; ++t) {
            for (size_t l = 0; l < m; ++l) {
                const double c = gen.collisions[t * m + l];
                sum[l] += c;
                sum2[l] += c * c;
                if (per_position) prof.per_position[t * m + l] += c;
            }
        }
    }
    const double n = static_cast<double>(n_texts * T);
    for (size_t l = 0; l < m; ++l) {
        prof.mean[l] = sum[l] / n;
        const double var = std::max(0.0, sum2[l] / n - prof.mean[l] * prof.mean[l]);
        prof.se[l] = std::sqrt(var / n);
    }
    if (per_position)
        for (double& v : prof.per_position) v /= static_cast<double>(n_texts);
    prof.n_samples = n_texts * T;
    return prof;
}

ChatEstimate estimate_chat(std::span<const GMatrix> train, const GSpec& gspec) {
    if (train.size() < 100)
        throw ParamError("estimate_chat: need >= 100 training texts, got " +
                         std::to_string(train.size()));
    const size_t m = train.front().m;
    std::vector<double> mean(m, 0.0);
    size_t rows = 0;
    for (const auto& gm : train) {
        if (gm.m != m) throw ParamError("estimate_chat: mixed layer counts in training matrices");
        for (size_t t = 0; t < gm.T; ++t)
            for (size_t l = 0; l < m; ++l) mean[l] += gm.at(t, l);
        rows += gm.T;
    }
    ChatEstimate est;
    est.n_train = train.size();
    est.chat.resize(m);
    for (size_t l = 0; l < m; ++l) {
        mean[l] /= static_cast<double>(rows);
        double c;
        if (gspec.is_bernoulli()) {
            // E[g|w] = p + p(1-p)(1-C); at p = 0.5 this is the (3 - 4 mean) form
            c = 1.0 - (mean[l] - gspec.p) / (gspec.p * (1.0 - gspec.p));
        } else {
            c = 4.0 - 6.0 * mean[l];
        }
        est.chat[l] = std::clamp(c, 0.0, 1.0);
    }
    return est;
}

WatermarkedGDist::WatermarkedGDist(const GSpec& spec, double collision) : gspec(spec), C(collision) {
    if (!(C >= 0.0 && C <= 1.0)) throw ParamError("watermarked_g_dist.C: must lie in [0,1]");
}

double WatermarkedGDist::pmf_one() const {
    if (!gspec.is_bernoulli()) throw ParamError("watermarked_g_dist: pmf_one is Bernoulli-only");
    return gspec.p + gspec.p * (1.0 - gspec.p) * (1.0 - C);
}

double WatermarkedGDist::pdf(double g) const {
    if (gspec.is_bernoulli()) throw ParamError("watermarked_g_dist: pdf is Uniform-only");
    if (g < 0.0 || g > 1.0) return 0.0;
    return C + 2.0 * (1.0 - C) * g;
}

double WatermarkedGDist::cdf(double g) const {
    double F;
    if (gspec.is_bernoulli())
        F = g < 0.0 ? 0.0 : (g < 1.0 ? 1.0 - gspec.p : 1.0);
    else
        F = std::clamp(g, 0.0, 1.0);
    return C * F + (1.0 - C) * F * F;
}

double WatermarkedGDist::mean() const {
    if (gspec.is_bernoulli()) return pmf_one();
    return (4.0 - C) / 6.0;
}

std::optional<uint32_t> detect_M(const CollisionProfile& profile, double delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw ParamError("detect_M.delta: must lie in (0, 0.5)");
    const size_t m = profile.layers();
    for (size_t l = 0; l < m; ++l) {
        double min_c = profile.mean[l];
        if (profile.has_per_position())
            for (size_t t = 0; t < profile.n_positions; ++t)
                min_c = std::min(min_c, profile.per_position[t * m + l]);
        if (min_c >= 1.0 - delta) return static_cast<uint32_t>(l + 1);
    }
    return std::nullopt;
}

std::vector<double> isotonic_non_decreasing(std::vector<double> v) {
    // pool adjacent violators with uniform weights
    std::vector<double> level, weight;
    for (double x : v) {
        level.push_back(x);
        weight.push_back(1.0);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double w = weight.back() + weight[weight.size() - 2];
            const double mean =
                (level.back() * weight.back() + level[level.size() - 2] * weight[weight.size() - 2]) / w;
            level.pop_back();
            weight.pop_back();
            level.back() = mean;
            weight.back() = w;
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (size_t i = 0; i < level.size(); ++i)
        out.insert(out.end(), static_cast<size_t>(weight[i] + 0.5), level[i]);
    return out;
}

std::string CollisionProfile::to_csv() const {
    std::string out = "t,layer,C,stderr\n";
    const size_t m = layers();
    if (has_per_position()) {
        for (size_t t = 0; t < n_positions; ++t)
            for (size_t l = 0; l < m; ++l)
                out += std::to_string(t) + "," + std::to_string(l + 1) + "," +
                       fmt_double(per_position[t * m + l]) + ",\n";
    }
    for (size_t l = 0; l < m; ++l)
        out += "-1," + std::to_string(l + 1) + "," + fmt_double(mean[l]) + "," + fmt_double(se[l]) + "\n";
    return out;
}

std::string CollisionProfile::to_json() const {
    std::string out = "{\"layers\":[";
    for (size_t l = 0; l < layers(); ++l) {
        if (l) out += ",";
        out += "{\"layer\":" + std::to_string(l + 1) + ",\"C\":" + fmt_double(mean[l]) +
               ",\"stderr\":" + fmt_double(se[l]) + "}";
    }
    out += "],\"n_samples\":" + std::to_string(n_samples) + "}";
    return out;
}

}  // namespace twl
