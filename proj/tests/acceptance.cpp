// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance suite: every detection-theory claim the lab exists to
// check, one verdict line per criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "twl/harness.hpp"

using namespace twl;

namespace {

void verdict(int id, bool pass, const std::string& name, const std::string& detail) {
    std::printf("[criterion %2d] %s  %s (%s)\n", id, pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", id, ": ", name, " -- ", detail);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// The sweep model: Zipf(1.1) over 1000 tokens at low temperature, giving an
// LLM-like entropy profile whose collision trajectory saturates inside the
// swept layer range (the rise-peak-fall regime of the mean score).
// The layer sweep runs the pinned Zipf(1.1) N=1000 model with short texts
// (T=2): the model's collision trajectory accumulates signal for ~30+ layers,
// and only at small mT do both the mean-score peak and its decline land inside
// m <= 128.
ExperimentConfig sweep_config() {
    ExperimentConfig cfg;
    cfg.kind = "sweep";
    cfg.model.kind = "zipf";
    cfg.model.n = 1000;
    cfg.model.zipf_s = 1.1;
    cfg.model.temperature = 1.0;
    cfg.gspec = GSpec::bernoulli(0.5);
    cfg.m_list = {1, 2, 4, 8, 16, 32, 64, 128};
    cfg.T = 2;
    cfg.n_texts = 1000;
    cfg.n_unwatermarked = 10000;
    cfg.n_train = 200;
    cfg.epsilon = 0.01;
    cfg.prompt_T = 4;  // per-text unwatermarked prompts keep context windows diverse
    cfg.master_seed = 20260810;
    return cfg;
}

// Default-scale config mirroring the experimental setup: m = 30 layers,
// 1000 + 10000 texts of 100 tokens at FPR 1%.
ExperimentConfig default_config() {
    ExperimentConfig cfg = sweep_config();
    cfg.T = 100;
    cfg.m_list = {30};
    return cfg;
}

struct SweepCache {
    SweepReport report;
    ExperimentConfig cfg;
};

const SweepCache& shared_sweep() {
    static const SweepCache cache = [] {
        SweepCache c;
        c.cfg = sweep_config();
        c.report = run_sweep(c.cfg);
        return c;
    }();
    return cache;
}

}  // namespace

TEST_CASE("criterion 1: exact non-distortion for N <= 4, m <= 2") {
    double worst = 0.0;
    const std::vector<std::vector<double>> bases = {
        {0.7, 0.3}, {0.5, 0.3, 0.2}, {0.4, 0.3, 0.2, 0.1}, {0.25, 0.25, 0.25, 0.25}};
    for (const auto& base : bases) {
        const size_t n = base.size();
        for (unsigned m = 1; m <= 2; ++m) {
            // Bernoulli(0.5): oracle = literal knockout enumeration over all
            // assignments and tie bits; implementation = winner-map composition.
            const auto ref = oracle::marginal_winner_dist_bernoulli(base, m, 0.5);
            std::vector<double> impl(n, 0.0);
            const uint64_t per_layer = uint64_t{1} << n;
            std::vector<uint64_t> masks(m, 0);
            for (;;) {
                std::vector<double> d = base;
                for (unsigned l = 0; l < m; ++l) {
                    std::vector<double> g(n);
                    for (size_t i = 0; i < n; ++i) g[i] = double((masks[l] >> i) & 1);
                    winner_map_layer(d, g);
                }
                const double w = std::ldexp(1.0, -static_cast<int>(n * m));
                for (size_t i = 0; i < n; ++i) impl[i] += w * d[i];
                size_t l = 0;
                while (l < m && ++masks[l] == per_layer) masks[l++] = 0;
                if (l == m) break;
            }
            for (size_t i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(impl[i] - base[i]));
                worst = std::max(worst, std::abs(ref[i] - base[i]));
                worst = std::max(worst, std::abs(ref[i] - impl[i]));
            }
        }
        // Uniform g-values: enumerate rank permutations per layer (ties have
        // measure zero), single layer suffices per extra check at m = 2 below.
        std::vector<uint32_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
        std::vector<double> impl(n, 0.0);
        double fact = 1.0;
        for (size_t i = 2; i <= n; ++i) fact *= static_cast<double>(i);
        std::vector<uint32_t> p1 = perm;
        do {
            std::vector<uint32_t> p2 = perm;
            do {
                std::vector<double> d = base;
                std::vector<double> g1(n), g2(n);
                for (size_t i = 0; i < n; ++i) {
                    g1[p1[i]] = static_cast<double>(i);
                    g2[p2[i]] = static_cast<double>(i);
                }
                winner_map_layer(d, g1);
                winner_map_layer(d, g2);
                for (size_t i = 0; i < n; ++i) impl[i] += d[i] / (fact * fact);
            } while (std::next_permutation(p2.begin(), p2.end()));
        } while (std::next_permutation(p1.begin(), p1.end()));
        for (size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(impl[i] - base[i]));
    }
    verdict(1, worst <= 1e-12, "exact non-distortion (enumeration oracle)",
            "max abs deviation " + fmt(worst));
}

TEST_CASE("criterion 2: watermarked g-value law at layer 1") {
    ExperimentConfig cfg = default_config();
    const SequenceModel model = cfg.model.build();
    const TournamentConfig tc = cfg.tournament(30);
    const size_t n_texts = 1000;

    double c1_sum = 0.0, g1_sum = 0.0;
    size_t tokens = 0;
    std::vector<double> collisions(cfg.T * tc.m);
    for (size_t i = 0; i < n_texts; ++i) {
        CounterRng rng(cfg.master_seed, streams::kWatermarked, i);
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const GenerationResult gen = generate_text(model, tc, cfg.T, rng, true, prompt);
        for (size_t t = 0; t < cfg.T; ++t) {
            c1_sum += gen.collisions[t * tc.m];
            g1_sum += g_value(gen.text.seeds[t], 1, gen.text.tokens[t], tc.gspec);
            ++tokens;
        }
    }
    const double c1 = c1_sum / static_cast<double>(tokens);
    const double expected = (3.0 - c1) / 4.0;
    const double freq = g1_sum / static_cast<double>(tokens);
    const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(tokens));
    const bool pass = std::abs(freq - expected) <= 3.0 * sigma;
    verdict(2, pass, "layer-1 watermarked g frequency = (3-C)/4",
            "freq " + fmt(freq) + " vs " + fmt(expected) + " +- " + fmt(3.0 * sigma));
}

TEST_CASE("criterion 3: mean-score moments match the closed forms with measured C") {
    // LLM-like bursty model; every text gets its own key, which realizes the
    // closed forms' key-marginal pseudorandomness hypothesis directly (a single
    // fixed key leaves small key-conditional offsets that a 1000-text mean
    // resolves).
    for (const GSpec spec : {GSpec::bernoulli(0.5), GSpec::uniform()}) {
        ExperimentConfig cfg = default_config();
        cfg.model.kind = "bursty";
        cfg.model.branch = 64;
        cfg.model.open_every = 8;
        cfg.gspec = spec;
        const SequenceModel model = cfg.model.build();
        const size_t n = cfg.n_texts;

        std::vector<double> ms(n);
        CollisionProfile prof;
        prof.mean.assign(30, 0.0);
        prof.n_positions = cfg.T;
        prof.n_samples = n * cfg.T;
        for (size_t i = 0; i < n; ++i) {
            TournamentConfig tc = cfg.tournament(30);
            tc.key = SecretKey{prf::fmix64(cfg.master_seed ^ (0xABC0 + i)),
                               prf::fmix64(cfg.master_seed ^ (0xDEF0 + i))};
            CounterRng rng(cfg.master_seed, streams::kWatermarked, i);
            const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
            const GenerationResult gen = generate_text(model, tc, cfg.T, rng, true, prompt);
            const GMatrix g = recompute_g_matrix(gen.text.tokens, tc.key, tc.m, cfg.H, spec,
                                                 model.vocab(), prompt);
            ms[i] = mean_score(g);
            for (size_t t = 0; t < cfg.T; ++t)
                for (size_t l = 0; l < tc.m; ++l) prof.mean[l] += gen.collisions[t * tc.m + l];
        }
        for (double& c : prof.mean) c /= static_cast<double>(n * cfg.T);
        prof.se.assign(30, 0.0);

        const ScoreMoments th = ms_moments(prof, spec, Condition::watermarked);
        double mean = 0.0;
        for (double v : ms) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : ms) var += (v - mean) * (v - mean);
        var /= (n - 1);

        const double tol_mean = 3.0 * std::sqrt(var / n);
        const double tol_var = 3.0 * var * std::sqrt(2.0 / (n - 1.0));
        const bool pass_mean = std::abs(mean - th.mean) <= tol_mean;
        const bool pass_var = std::abs(var - th.variance) <= tol_var;
        verdict(3, pass_mean && pass_var, "MS moments (" + spec.name() + ")",
                "mean " + fmt(mean) + " vs " + fmt(th.mean) + " +- " + fmt(tol_mean) + "; var " +
                    fmt(var) + " vs " + fmt(th.variance) + " +- " + fmt(tol_var));
    }
}

TEST_CASE("criterion 4: closed-form threshold achieves FPR = 1%") {
    for (const GSpec spec : {GSpec::bernoulli(0.5), GSpec::uniform()}) {
        ExperimentConfig cfg = default_config();
        cfg.gspec = spec;
        const SequenceModel model = cfg.model.build();
        const uint32_t m = 30;
        const double tau = threshold_ms_closed(cfg.epsilon, m, cfg.T, spec);

        size_t hits = 0;
        const size_t n = cfg.n_unwatermarked;
        TournamentConfig plain = cfg.tournament(1);
        plain.m = 0;
        for (size_t i = 0; i < n; ++i) {
            CounterRng rng(cfg.master_seed, streams::kUnwatermarked, i);
            const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
            const GenerationResult gen = generate_text(model, plain, cfg.T, rng, false, prompt);
            const GMatrix g = recompute_g_matrix(gen.text.tokens, cfg.key, m, cfg.H, spec,
                                                 model.vocab(), prompt);
            hits += mean_score(g) > tau;
        }
        const double fpr = static_cast<double>(hits) / static_cast<double>(n);
        const double band = 3.0 * std::sqrt(cfg.epsilon * (1.0 - cfg.epsilon) / static_cast<double>(n));
        verdict(4, std::abs(fpr - cfg.epsilon) <= band, "FPR at closed MS threshold (" + spec.name() + ")",
                "fpr " + fmt(fpr) + " vs 0.01 +- " + fmt(band));
    }
}

TEST_CASE("criterion 5: mean-score TPR is unimodal over the layer sweep") {
    const auto& sw = shared_sweep();
    std::vector<double> tpr;
    for (const auto& row : sw.report.rows)
        if (row.score_kind == "mean") tpr.push_back(row.tpr_emp);
    REQUIRE(tpr.size() == 8);

    // 3-point smoothed first differences with a 2-sigma noise floor
    std::vector<double> s(tpr.size());
    for (size_t i = 0; i < tpr.size(); ++i) {
        const size_t lo = i == 0 ? 0 : i - 1, hi = std::min(i + 1, tpr.size() - 1);
        double acc = 0.0;
        for (size_t j = lo; j <= hi; ++j) acc += tpr[j];
        s[i] = acc / static_cast<double>(hi - lo + 1);
    }
    const double noise = 2.0 * std::sqrt(0.25 / static_cast<double>(sw.cfg.n_texts));
    int sign_changes = 0, last = 0;
    bool rose = false, fell = false;
    for (size_t i = 1; i < s.size(); ++i) {
        const double d = s[i] - s[i - 1];
        const int sg = d > noise ? 1 : (d < -noise ? -1 : 0);
        if (sg == 0) continue;
        if (last != 0 && sg != last) ++sign_changes;
        rose |= sg > 0;
        fell |= sg < 0;
        last = sg;
    }
    const bool shape_ok = rose && fell && sign_changes == 1;

    // closed-form curve value at the largest m from the measured profile
    const std::vector<double> mono = isotonic_non_decreasing(sw.report.layer_C);
    const auto [curve, consts] = ms_tpr_curve(sw.cfg.epsilon, mono, sw.cfg.T, 128,
                                              sw.cfg.gspec, /*delta_M=*/1e-3);
    const double theory128 = curve.tpr.back();
    const double emp128 = tpr.back();
    const bool tail_ok = std::abs(theory128 - emp128) <= 0.03;

    std::string detail = "tpr:";
    for (double v : tpr) detail += " " + fmt(v);
    detail += "; curve(128) " + fmt(theory128) + " vs emp " + fmt(emp128) + "; M=" +
              std::to_string(consts.M);
    verdict(5, shape_ok && tail_ok, "MS TPR rises once and falls once; tail matches the closed-form curve",
            detail);
}

TEST_CASE("criterion 6: MS TPR asymptote is the FPR") {
    // closed form at m = 1e6 on a saturated profile
    const std::vector<double> C = {0.3, 0.6, 0.9, 1.0};
    const auto [curve, consts] = ms_tpr_curve(0.01, C, 100, 4, GSpec::bernoulli(0.5));
    const double limit = ms_tpr_curve_at(consts, 1e6);
    const bool closed_ok = std::abs(limit - 0.01) <= 1e-3;

    // empirical check at 10x the measured saturation layer of a fast-saturating
    // model (small total signal, so 10M sits in the asymptotic regime)
    ExperimentConfig cfg = default_config();
    cfg.model.kind = "two_point";
    cfg.model.two_point_q = 0.97;
    cfg.model.n = 8;
    const SequenceModel model = cfg.model.build();
    TournamentConfig probe = cfg.tournament(24);
    const CollisionProfile prof = layer_collisions_mc(model, probe, 300, cfg.T, cfg.master_seed);
    const auto M = detect_M(prof, 0.01);
    REQUIRE(M.has_value());
    const uint32_t m10 = *M * 10;

    const TournamentConfig tc = cfg.tournament(m10);
    const size_t n_w = 1000, n_u = cfg.n_unwatermarked;
    std::vector<double> wm(n_w), um(n_u);
    for (size_t i = 0; i < n_w; ++i) {
        CounterRng rng(cfg.master_seed, streams::kWatermarked, i);
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const auto gen = generate_text(model, tc, cfg.T, rng, false, prompt);
        wm[i] = mean_score(recompute_g_matrix(gen.text.tokens, cfg.key, m10, cfg.H, cfg.gspec,
                                              model.vocab(), prompt));
    }
    TournamentConfig plain = tc;
    plain.m = 0;
    for (size_t i = 0; i < n_u; ++i) {
        CounterRng rng(cfg.master_seed, streams::kUnwatermarked, i);
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const auto gen = generate_text(model, plain, cfg.T, rng, false, prompt);
        um[i] = mean_score(recompute_g_matrix(gen.text.tokens, cfg.key, m10, cfg.H, cfg.gspec,
                                              model.vocab(), prompt));
    }
    const TprResult res = tpr_at_fpr(wm, um, cfg.epsilon);
    const double band = 3.0 * std::sqrt(cfg.epsilon * (1.0 - cfg.epsilon) / static_cast<double>(n_w));
    const bool emp_ok = std::abs(res.tpr - cfg.epsilon) <= band;
    verdict(6, closed_ok && emp_ok, "MS TPR asymptote = epsilon",
            "closed(1e6) " + fmt(limit) + "; empirical at m=10M=" + std::to_string(m10) + ": " +
                fmt(res.tpr) + " vs 0.01 +- " + fmt(band));
}

TEST_CASE("criterion 7: Bayesian TPR is monotone and saturates") {
    // closed form: non-decreasing and exactly constant after saturation
    const size_t T = 100;
    std::vector<double> C = {0.2, 0.5, 0.8, 0.95, 1.0, 1.0, 1.0, 1.0};
    ChatEstimate chat;
    chat.chat = C;
    CollisionProfile prof;
    prof.mean = C;
    prof.n_positions = T;
    bool monotone = true, saturated = true;
    double prev = 0.0;
    std::vector<double> series;
    for (uint32_t m = 1; m <= 8; ++m) {
        const double v = bs_tpr(0.01, prof, chat, 1.0, GSpec::bernoulli(0.5), m, T);
        if (v < prev - 1e-12) monotone = false;
        series.push_back(v);
        prev = v;
    }
    for (uint32_t m = 5; m <= 8; ++m)
        if (std::abs(series[m - 1] - series[4]) > 1e-12) saturated = false;

    // empirical: BS TPR over the sweep never drops by more than 2 binomial sigma
    const auto& sw = shared_sweep();
    std::vector<double> tpr;
    for (const auto& row : sw.report.rows)
        if (row.score_kind == "bayesian") tpr.push_back(row.tpr_emp);
    bool emp_ok = true;
    for (size_t i = 1; i < tpr.size(); ++i) {
        const double p = std::max(std::min(tpr[i - 1], 1.0 - 1e-9), 1e-9);
        const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(sw.cfg.n_texts));
        if (tpr[i] < tpr[i - 1] - 2.0 * std::max(sigma, 1e-3)) emp_ok = false;
    }
    std::string detail = "bs tpr:";
    for (double v : tpr) detail += " " + fmt(v);
    verdict(7, monotone && saturated && emp_ok, "BS TPR monotone non-decreasing, saturating", detail);
}

TEST_CASE("criterion 8: Bernoulli(0.5) is optimal") {
    // exact Z(p) minimized at p = 1/2 across a 3x3x3x3 parameter grid
    bool scan_ok = true;
    std::string fail_at;
    const std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    for (double eps : {0.01, 0.05, 0.1}) {
        for (uint32_t m : {10u, 30u, 100u}) {
            for (size_t T : {size_t{50}, size_t{100}, size_t{200}}) {
                for (double a : {0.02, 0.05, 0.1}) {
                    const auto scan = optimal_p_scan(eps, m, T, a, a * a, grid);
                    if (scan.p_star != 0.5) {
                        scan_ok = false;
                        fail_at = "eps=" + fmt(eps) + " m=" + std::to_string(m) +
                                  " T=" + std::to_string(T) + " E[a]=" + fmt(a);
                    }
                }
            }
        }
    }

    // empirical TPR at p = 1/2 is not beaten by p = 0.3 / 0.7 (2 sigma slack).
    // Cyclic-shift model: low entropy (interior TPRs at m=30, T=100) with
    // diverse context windows.
    ExperimentConfig cfg = default_config();
    cfg.model.kind = "shift";
    cfg.model.two_point_q = 0.9;
    cfg.m_list = {30};
    cfg.n_texts = 1000;
    std::map<double, double> tpr_at_p;
    for (double p : {0.3, 0.5, 0.7}) {
        cfg.gspec = GSpec::bernoulli(p);
        const SequenceModel model = cfg.model.build();
        const TournamentConfig tc = cfg.tournament(30);
        std::vector<double> wm(cfg.n_texts), um(cfg.n_unwatermarked);
        for (size_t i = 0; i < cfg.n_texts; ++i) {
            CounterRng rng(cfg.master_seed, streams::kWatermarked,
                           (static_cast<uint64_t>(p * 100) << 32) | i);
            const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
            const auto gen = generate_text(model, tc, cfg.T, rng, false, prompt);
            wm[i] = mean_score(recompute_g_matrix(gen.text.tokens, cfg.key, 30, cfg.H, cfg.gspec,
                                                  model.vocab(), prompt));
        }
        TournamentConfig plain = tc;
        plain.m = 0;
        for (size_t i = 0; i < cfg.n_unwatermarked; ++i) {
            CounterRng rng(cfg.master_seed, streams::kUnwatermarked, i);
            const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
            const auto gen = generate_text(model, plain, cfg.T, rng, false, prompt);
            um[i] = mean_score(recompute_g_matrix(gen.text.tokens, cfg.key, 30, cfg.H, cfg.gspec,
                                                  model.vocab(), prompt));
        }
        tpr_at_p[p] = tpr_at_fpr(wm, um, cfg.epsilon).tpr;
    }
    const double sigma = std::sqrt(0.25 / static_cast<double>(cfg.n_texts));
    const bool emp_ok = tpr_at_p[0.5] >= tpr_at_p[0.3] - 2.0 * sigma &&
                        tpr_at_p[0.5] >= tpr_at_p[0.7] - 2.0 * sigma;
    verdict(8, scan_ok && emp_ok, "optimal Bernoulli parameter is 1/2",
            (scan_ok ? "scan argmin 0.5 on all 81 combos" : "scan failed at " + fail_at) +
                "; emp tpr p=0.3/0.5/0.7: " + fmt(tpr_at_p[0.3]) + "/" + fmt(tpr_at_p[0.5]) + "/" +
                fmt(tpr_at_p[0.7]));
}

TEST_CASE("criterion 9: mean scores pass the normality test") {
    ExperimentConfig cfg = default_config();
    cfg.kind = "clt";
    const CltReport rep = run_clt_check(cfg);
    verdict(9, rep.pass, "Anderson-Darling on 1000 mean scores (T=100, m=30)",
            "A*2 = " + fmt(rep.a2_adjusted) + " < " + fmt(rep.critical));
}

TEST_CASE("criterion 10: layer-inflation attack strips the watermark") {
    // Attack regime per the threat model: one plausible continuation plus a
    // confusable tail, so observed frequency actually certifies g-alignment at
    // 2^10 samples per position (a 1000-token near-uniform tail would bury the
    // frequency signal in Poisson noise).
    ExperimentConfig cfg = default_config();
    cfg.kind = "attack";
    cfg.model.kind = "bursty";
    cfg.model.branch = 64;
    cfg.model.open_every = 8;
    cfg.attack.n_layers = 10;
    cfg.attack.n_texts = 100;
    const AttackReport rep = run_attack_eval(cfg);
    const double base_tpr = rep.rows[0].tpr;
    const double atk_tpr = rep.rows[1].tpr;
    const bool pass = base_tpr >= 0.9 && atk_tpr <= 0.3 && rep.below_tau_fraction > 0.5;
    verdict(10, pass, "attack: baseline >= 0.9, attacked <= 0.3, majority below tau",
            "baseline " + fmt(base_tpr) + ", attacked " + fmt(atk_tpr) + ", below-tau " +
                fmt(rep.below_tau_fraction) + ", mean " + fmt(rep.rows[0].mean_score_avg) + " -> " +
                fmt(rep.rows[1].mean_score_avg) + " vs tau " + fmt(rep.rows[0].tau));
}

TEST_CASE("criterion 11: numeric primitives") {
    double icdf_err = 0.0;
    for (int i = 1; i < 10000; ++i) {
        const double q = static_cast<double>(i) / 10000.0;
        icdf_err = std::max(icdf_err, std::abs(normal_icdf(q) - oracle::normal_icdf_ref(q)));
    }
    double i_err = 0.0;
    for (double chat = 0.0; chat <= 1.0; chat += 0.01) {
        const auto a = i_integrals(chat);
        const auto q = i_integrals_quadrature(chat);
        i_err = std::max({i_err, std::abs(a.I1 - q.I1), std::abs(a.I2 - q.I2),
                          std::abs(a.I3 - q.I3), std::abs(a.I4 - q.I4)});
    }
    double cont_err = 0.0;
    for (const GSpec spec : {GSpec::bernoulli(0.5), GSpec::uniform()}) {
        const std::vector<double> C = {0.25, 0.55, 0.8, 0.93, 0.985, 1.0};
        const auto [curve, k] = ms_tpr_curve(0.01, C, 100, 12, spec);
        const double left =
            1.0 - normal_cdf(k.A_hat / k.B - (k.A / k.B) * std::sqrt(static_cast<double>(k.M)));
        cont_err = std::max(cont_err, std::abs(left - ms_tpr_curve_at(k, k.M)));
    }
    const bool pass = icdf_err <= 1e-6 && i_err <= 1e-8 && cont_err <= 1e-6;
    verdict(11, pass, "icdf/I-integrals/curve continuity",
            "icdf " + fmt(icdf_err) + ", integrals " + fmt(i_err) + ", continuity " + fmt(cont_err));
}

TEST_CASE("criterion 12: byte-identical reruns across thread counts") {
    ExperimentConfig cfg = sweep_config();
    cfg.m_list = {2, 8};
    cfg.n_texts = 150;
    cfg.n_unwatermarked = 400;
    cfg.epsilon = 0.05;
    cfg.n_train = 100;
    cfg.threads = 1;
    const std::string a = run_sweep(cfg).to_csv();
    cfg.threads = 8;
    const std::string b = run_sweep(cfg).to_csv();
    cfg.threads = 8;
    const std::string c = run_sweep(cfg).to_csv();
    verdict(12, a == b && b == c, "identical CSV at --threads 1 and 8",
            a == b ? "byte-identical" : "outputs differ");
}
