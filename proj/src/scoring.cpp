// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "twl/error.hpp"

namespace twl {

GMatrix recompute_g_matrix(std::span<const TokenId> tokens, const SecretKey& key, uint32_t m,
                           uint32_t H, const GSpec& gspec, size_t vocab,
                           std::span<const TokenId> prefix) {
    if (tokens.empty()) throw ParamError("recompute_g_matrix: empty token sequence");
    if (m < 1) throw ParamError("recompute_g_matrix.m: need >= 1 layer");
    GMatrix g;
    g.T = tokens.size();
    g.m = m;
    g.gspec = gspec;
    g.values.resize(g.T * m);
    std::vector<TokenId> window(H, static_cast<TokenId>(vocab));
    for (TokenId t : prefix) {
        window.erase(window.begin());
        window.push_back(t);
    }
    for (size_t t = 0; t < tokens.size(); ++t) {
        const Seed seed = derive_seed(window, key);
        for (uint32_t l = 1; l <= m; ++l) g.values[t * m + (l - 1)] = g_value(seed, l, tokens[t], gspec);
        window.erase(window.begin());
        window.push_back(tokens[t]);
    }
    return g;
}

void DetectorParams::validate() const {
    if (!(prior_w > 0.0 && prior_w < 1.0)) throw ParamError("detector.prior_w: must lie in (0,1)");
    if (!(g_floor > 0.0 && g_floor <= 1e-6))
        throw ParamError("detector.g_floor: must lie in (0, 1e-6]");
    for (double c : chat.chat)
        if (!(c >= 0.0 && c <= 1.0)) throw ParamError("detector.chat: entries must lie in [0,1]");
}

double mean_score(const GMatrix& g) {
    if (g.values.empty()) throw ParamError("mean_score: empty g-matrix");
    double s = 0.0;
    for (double v : g.values) s += v;
    return s / static_cast<double>(g.values.size());
}

double bayesian_logodds(const GMatrix& g, const DetectorParams& params) {
    params.validate();
    if (params.chat.chat.size() != g.m)
        throw ParamError("bayesian_score: chat has " + std::to_string(params.chat.chat.size()) +
                         " layers, g-matrix has " + std::to_string(g.m));
    const size_t m = g.m;
    double llr = 0.0;
    if (g.gspec.is_bernoulli()) {
        if (g.gspec.p != 0.5)
            throw ParamError("bayesian_score: likelihood is stated for Bernoulli(0.5)");
        std::vector<double> l1(m), l0(m);
        for (size_t l = 0; l < m; ++l) {
            const double ch = params.chat.chat[l];
            l1[l] = std::log1p((1.0 - ch) / 2.0);   // ln((3 - ch)/2)
            l0[l] = std::log1p(-(1.0 - ch) / 2.0);  // ln((1 + ch)/2)
        }
        for (size_t t = 0; t < g.T; ++t)
            for (size_t l = 0; l < m; ++l) llr += g.at(t, l) == 1.0 ? l1[l] : l0[l];
    } else {
        for (size_t t = 0; t < g.T; ++t) {
            for (size_t l = 0; l < m; ++l) {
                const double ch = params.chat.chat[l];
                const double gv = std::clamp(g.at(t, l), params.g_floor, 1.0);
                llr += std::log(ch + 2.0 * (1.0 - ch) * gv);
            }
        }
    }
    return llr + std::log(params.alpha());
}

double bayesian_score(const GMatrix& g, const DetectorParams& params) {
    const double x = bayesian_logodds(g, params);
    double s;
    if (x >= 0.0)
        s = 1.0 / (1.0 + std::exp(-x));
    else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::clamp(s, 1e-300, 1.0 - 1e-16);
}

double calibrate_threshold_empirical(std::span<const double> unwatermarked_scores, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ParamError("calibrate_threshold.eps: must lie in (0,1)");
    const size_t n = unwatermarked_scores.size();
    if (static_cast<double>(n) < 1.0 / eps)
        throw ParamError("calibrate_threshold: need >= 1/eps unwatermarked scores, got " +
                         std::to_string(n));
    const size_t k = static_cast<size_t>(std::ceil((1.0 - eps) * static_cast<double>(n + 1)));
    std::vector<double> sorted(unwatermarked_scores.begin(), unwatermarked_scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
    return sorted[k - 1];
}

TprResult tpr_at_fpr(std::span<const double> watermarked_scores,
                     std::span<const double> unwatermarked_scores, double eps) {
    if (watermarked_scores.empty()) throw ParamError("tpr_at_fpr: no watermarked scores");
    TprResult res;
    res.tau = calibrate_threshold_empirical(unwatermarked_scores, eps);
    size_t hits = 0;
    for (double s : watermarked_scores) hits += classify(s, res.tau);
    res.tpr = static_cast<double>(hits) / static_cast<double>(watermarked_scores.size());
    return res;
}

}  // namespace twl
