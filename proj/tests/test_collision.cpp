// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "twl/collision.hpp"
#include "twl/scoring.hpp"
#include "twl/theory.hpp"

using namespace twl;

TEST_CASE("collision_probability basics") {
    CHECK(collision_probability(make_distribution(DistKind::uniform, 10)) == doctest::Approx(0.1));
    TokenDistribution point{{1.0, 0.0}};
    CHECK(collision_probability(point) == 1.0);
    TokenDistribution mix{{0.5, 0.25, 0.25}};
    CHECK(collision_probability(mix) == doctest::Approx(0.375));
}

TEST_CASE("exact layer collisions: uniform N=2 under Bernoulli(0.5)") {
    // Averaging convention: C_l is the expected collision probability of the
    // realized layer-l entrant distribution. Hand enumeration of the 4 layer-1
    // assignments gives winner distributions (1/2,1/2) twice (collision 1/2) and
    // (1/4,3/4) / (3/4,1/4) twice (collision 5/8), so C_2 = 0.5625; the
    // alternative convention (collision of the averaged distribution) would
    // freeze C at 1/2 forever and contradict strict growth below saturation.
    const auto d = make_distribution(DistKind::uniform, 2);
    const auto C = layer_collisions_exact(d, 3, GSpec::bernoulli(0.5));
    CHECK(C[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(C[1] == doctest::Approx(0.5625).epsilon(1e-12));

    const auto ref = oracle::layer_collisions_bernoulli(d.probs, 3, 0.5);
    for (size_t l = 0; l < C.size(); ++l) CHECK(C[l] == doctest::Approx(ref[l]).epsilon(1e-12));
}

TEST_CASE("exact layer collisions match the golden file") {
    std::ifstream in(std::string(TWL_SOURCE_DIR) + "/data/collision_golden.txt");
    REQUIRE(in.good());
    // lines: kind N p_or_s gspec p m C1 C2 ... (comments start with '#')
    size_t checked = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kind, family;
        size_t n;
        double param, p;
        uint32_t m;
        ss >> kind >> n >> param >> family >> p >> m;
        DistParams dp;
        DistKind dk;
        if (kind == "uniform")
            dk = DistKind::uniform;
        else if (kind == "zipf") {
            dk = DistKind::zipf;
            dp.zipf_s = param;
        } else {
            dk = DistKind::two_point;
            dp.two_point_q = param;
        }
        const auto dist = make_distribution(dk, n, dp);
        const GSpec spec = family == "uniform" ? GSpec::uniform() : GSpec::bernoulli(p);
        const auto C = layer_collisions_exact(dist, m, spec);
        for (uint32_t l = 0; l < m; ++l) {
            double expect;
            ss >> expect;
            CHECK(C[l] == doctest::Approx(expect).epsilon(1e-10));
        }
        ++checked;
    }
    CHECK(checked >= 4);
}

TEST_CASE("exact layer collisions are non-decreasing (Bernoulli and Uniform)") {
    const auto dists = {
        make_distribution(DistKind::zipf, 5, DistParams{.zipf_s = 1.0}),
        make_distribution(DistKind::two_point, 4, DistParams{.two_point_q = 0.6}),
        make_distribution(DistKind::uniform, 6),
    };
    for (const auto& d : dists) {
        for (const GSpec spec : {GSpec::bernoulli(0.5), GSpec::bernoulli(0.3)}) {
            const auto C = layer_collisions_exact(d, 3, spec);
            for (size_t l = 1; l < C.size(); ++l) CHECK(C[l] >= C[l - 1] - 1e-12);
        }
        const auto Cu = layer_collisions_exact(d, 2, GSpec::uniform());
        CHECK(Cu[1] >= Cu[0] - 1e-12);
    }
    // point mass: all layers collide with certainty
    TokenDistribution point{{1.0, 0.0, 0.0}};
    for (double c : layer_collisions_exact(point, 4, GSpec::bernoulli(0.5)))
        CHECK(c == doctest::Approx(1.0));
}

TEST_CASE("exact enumeration enforces its capacity limits") {
    const auto big = make_distribution(DistKind::uniform, 13);
    CHECK_THROWS_AS(layer_collisions_exact(big, 2, GSpec::bernoulli(0.5)), CapacityError);
    const auto n9 = make_distribution(DistKind::uniform, 9);
    CHECK_THROWS_AS(layer_collisions_exact(n9, 2, GSpec::uniform()), CapacityError);
    const auto n12 = make_distribution(DistKind::uniform, 12);
    CHECK_THROWS_AS(layer_collisions_exact(n12, 4, GSpec::bernoulli(0.5)), CapacityError);
}

namespace {
// Multi-key MC average with a between-key standard error. One key's profile is
// conditional on that key's seed assignments (small vocabularies revisit the
// same context windows), so the assignment-marginal value needs key averaging.
void check_mc_vs_exact(const TokenDistribution& d, const GSpec& spec, uint32_t m,
                       const std::vector<double>& exact, uint64_t salt) {
    const auto model = SequenceModel::iid(d);
    TournamentConfig tc;
    tc.m = m;
    tc.gspec = spec;
    const size_t n_keys = 16;
    std::vector<double> sum(m, 0.0), sum2(m, 0.0);
    for (size_t k = 0; k < n_keys; ++k) {
        tc.key = SecretKey{salt * 1000 + k, 0xC0FFEE + 7 * k};
        const auto one = layer_collisions_mc(model, tc, 120, 50, salt + k);
        for (size_t l = 0; l < m; ++l) {
            sum[l] += one.mean[l];
            sum2[l] += one.mean[l] * one.mean[l];
        }
    }
    for (size_t l = 0; l < m; ++l) {
        const double mean = sum[l] / n_keys;
        const double var = std::max(0.0, sum2[l] / n_keys - mean * mean);
        const double se = std::sqrt(var / n_keys);
        CHECK(std::abs(mean - exact[l]) < 3.0 * std::max(se, 2e-4));
    }
}
}  // namespace

TEST_CASE("MC collision profile agrees with exact enumeration (N=8)") {
    const auto d = make_distribution(DistKind::zipf, 8, DistParams{.zipf_s = 0.7});
    check_mc_vs_exact(d, GSpec::bernoulli(0.5), 3,
                      layer_collisions_exact(d, 3, GSpec::bernoulli(0.5)), 31337);

    SUBCASE("uniform g-values too (N=5, m=2)") {
        const auto d5 = make_distribution(DistKind::zipf, 5, DistParams{.zipf_s = 0.9});
        check_mc_vs_exact(d5, GSpec::uniform(), 2, layer_collisions_exact(d5, 2, GSpec::uniform()),
                          999);
    }
}

TEST_CASE("MC collision profiles are non-decreasing up to noise") {
    const auto d = make_distribution(DistKind::zipf, 12, DistParams{.zipf_s = 0.8});
    TournamentConfig tc;
    tc.m = 6;
    tc.gspec = GSpec::bernoulli(0.5);
    tc.key = SecretKey{21, 42};
    const auto prof = layer_collisions_mc(SequenceModel::iid(d), tc, 400, 50, 77);
    for (size_t l = 1; l < prof.mean.size(); ++l)
        CHECK(prof.mean[l] >= prof.mean[l - 1] - 3.0 * (prof.se[l] + prof.se[l - 1]));
}

TEST_CASE("MC collision profile: point mass and uniform base cases") {
    TournamentConfig tc;
    tc.m = 3;
    tc.gspec = GSpec::bernoulli(0.5);
    tc.key = SecretKey{1, 2};

    TokenDistribution point{{1.0, 0.0}};
    const auto prof = layer_collisions_mc(SequenceModel::iid(point), tc, 100, 10, 5);
    for (double c : prof.mean) CHECK(c == 1.0);

    const auto u1000 = make_distribution(DistKind::uniform, 1000);
    const auto prof2 = layer_collisions_mc(SequenceModel::iid(u1000), tc, 100, 20, 6);
    CHECK(prof2.mean[0] == doctest::Approx(0.001).epsilon(1e-9));  // layer 1 = base collision

    CHECK_THROWS_AS(layer_collisions_mc(SequenceModel::iid(u1000), tc, 50, 10, 7), ParamError);
}

TEST_CASE("estimate_chat inverts the watermarked g mean") {
    const GSpec spec = GSpec::bernoulli(0.5);
    auto matrix_of = [&](double value, size_t T, size_t m) {
        GMatrix g;
        g.T = T;
        g.m = m;
        g.gspec = spec;
        g.values.assign(T * m, value);
        return g;
    };

    std::vector<GMatrix> ones(120, matrix_of(1.0, 10, 2));
    const auto est1 = estimate_chat(ones, spec);
    for (double c : est1.chat) CHECK(c == 0.0);  // 3 - 4*1 = -1, clamped

    std::vector<GMatrix> half(120, matrix_of(0.5, 10, 2));
    for (auto& g : half)  // alternate 0/1 across positions so each layer mean is 1/2
        for (size_t t = 0; t < g.T; ++t)
            for (size_t l = 0; l < g.m; ++l) g.values[t * g.m + l] = t % 2 ? 1.0 : 0.0;
    const auto est2 = estimate_chat(half, spec);
    for (double c : est2.chat) CHECK(c == doctest::Approx(1.0));

    std::vector<GMatrix> few(50, matrix_of(1.0, 4, 2));
    CHECK_THROWS_AS(estimate_chat(few, spec), ParamError);
}

TEST_CASE("estimate_chat recovers the MC collision profile end to end") {
    // Profile and training matrices come from the same generation runs, so both
    // estimators share the seed-visitation randomness and the residual is the
    // per-match g noise alone.
    // flat enough that no single context window carries mass (the per-layer
    // moment identity is an expectation over seed assignments)
    const auto d = make_distribution(DistKind::zipf, 100, DistParams{.zipf_s = 1.0});
    const auto model = SequenceModel::iid(d);
    TournamentConfig tc;
    tc.m = 4;
    tc.gspec = GSpec::bernoulli(0.5);
    tc.key = SecretKey{3, 4};
    const size_t n_texts = 300, T = 60;

    std::vector<GMatrix> mats(n_texts);
    CollisionProfile prof;
    prof.mean.assign(tc.m, 0.0);
    prof.se.assign(tc.m, 0.0);
    prof.n_positions = T;
    prof.n_samples = n_texts * T;
    std::vector<std::vector<double>> text_gmean(n_texts, std::vector<double>(tc.m, 0.0));
    for (size_t i = 0; i < n_texts; ++i) {
        CounterRng rng(42, streams::kTrain, i);
        const auto gen = generate_text(model, tc, T, rng, /*record=*/true);
        mats[i] = recompute_g_matrix(gen.text.tokens, tc.key, tc.m, tc.H, tc.gspec, model.vocab());
        for (size_t t = 0; t < T; ++t)
            for (size_t l = 0; l < tc.m; ++l) {
                prof.mean[l] += gen.collisions[t * tc.m + l];
                text_gmean[i][l] += mats[i].at(t, l);
            }
        for (size_t l = 0; l < tc.m; ++l) text_gmean[i][l] /= static_cast<double>(T);
    }
    for (double& c : prof.mean) c /= static_cast<double>(n_texts * T);

    const auto est = estimate_chat(mats, tc.gspec);
    for (size_t l = 0; l < tc.m; ++l) {
        // chat = 3 - 4*mean(g); SE of the difference from the per-text spread of
        // (g mean - expected given the text's realized collisions)
        double s1 = 0.0, s2 = 0.0;
        for (size_t i = 0; i < n_texts; ++i) {
            s1 += text_gmean[i][l];
            s2 += text_gmean[i][l] * text_gmean[i][l];
        }
        const double n = static_cast<double>(n_texts);
        const double var_text = std::max(0.0, s2 / n - (s1 / n) * (s1 / n));
        const double se_chat = 4.0 * std::sqrt(var_text / n);
        CHECK(std::abs(est.chat[l] - prof.mean[l]) < 3.0 * se_chat + 0.005);
    }

    SUBCASE("unwatermarked data yields chat = 1") {
        std::vector<GMatrix> null_mats(150);
        for (size_t i = 0; i < null_mats.size(); ++i) {
            CounterRng rng(43, streams::kUnwatermarked, i);
            TournamentConfig plain = tc;
            plain.m = 0;
            const auto gen = generate_text(model, plain, T, rng);
            null_mats[i] =
                recompute_g_matrix(gen.text.tokens, tc.key, tc.m, tc.H, tc.gspec, model.vocab());
        }
        const auto est0 = estimate_chat(null_mats, tc.gspec);
        for (double c : est0.chat)
            CHECK(std::abs(c - 1.0) < 3.0 * 4.0 * std::sqrt(0.25 / (150.0 * T)));
    }
}

TEST_CASE("watermarked g-value distribution") {
    SUBCASE("C=1 collapses to the base law") {
        const WatermarkedGDist wb(GSpec::bernoulli(0.5), 1.0);
        CHECK(wb.pmf_one() == doctest::Approx(0.5));
        const WatermarkedGDist wu(GSpec::uniform(), 1.0);
        CHECK(wu.pdf(0.3) == doctest::Approx(1.0));
        CHECK(wu.cdf(0.3) == doctest::Approx(0.3));
    }
    SUBCASE("C=0 gives the fully biased law") {
        const WatermarkedGDist wb(GSpec::bernoulli(0.5), 0.0);
        CHECK(wb.pmf_one() == doctest::Approx(0.75));
        const WatermarkedGDist wu(GSpec::uniform(), 0.0);
        CHECK(wu.pdf(0.3) == doctest::Approx(0.6));
        CHECK(wu.cdf(0.3) == doctest::Approx(0.09));
    }
    SUBCASE("general Bernoulli(p) success probability") {
        const WatermarkedGDist w(GSpec::bernoulli(0.3), 0.25);
        CHECK(w.pmf_one() == doctest::Approx(0.3 + 0.3 * 0.7 * 0.75));
    }
    SUBCASE("normalization and stochastic dominance") {
        for (double c : {0.0, 0.25, 0.5, 0.9}) {
            const WatermarkedGDist wu(GSpec::uniform(), c);
            const double total = adaptive_simpson([&](double x) { return wu.pdf(x); }, 0.0, 1.0, 1e-12);
            CHECK(std::abs(total - 1.0) <= 1e-10);
            bool strict = false;
            for (double g = 0.05; g < 1.0; g += 0.05) {
                CHECK(wu.cdf(g) <= g + 1e-12);  // F_gw <= F_g
                strict |= wu.cdf(g) < g - 1e-12;
            }
            CHECK(strict == (c < 1.0));

            const WatermarkedGDist wb(GSpec::bernoulli(0.5), c);
            CHECK(wb.pmf_one() + (1.0 - wb.pmf_one()) == doctest::Approx(1.0));
            CHECK(wb.cdf(0.0) <= 0.5 + 1e-12);
        }
    }
    CHECK_THROWS_AS(WatermarkedGDist(GSpec::uniform(), 1.5), ParamError);
}

TEST_CASE("detect_M") {
    CollisionProfile all1;
    all1.mean = {1.0, 1.0, 1.0};
    all1.n_positions = 10;
    CHECK(detect_M(all1, 1e-6) == 1);

    CollisionProfile low;
    low.mean = {0.2, 0.5, 0.9};
    low.n_positions = 10;
    CHECK_FALSE(detect_M(low, 1e-3).has_value());
    CHECK(detect_M(low, 0.15) == 3);
    CHECK_THROWS_AS(detect_M(low, 0.7), ParamError);

    SUBCASE("MC profile matches the exact oracle layer (N=2, coarse delta)") {
        // With a 2-token vocabulary there are only ~16 distinct context windows,
        // so a single key's profile is key-conditional; average over many keys to
        // recover the assignment-marginal collisions the exact oracle computes.
        const auto d = make_distribution(DistKind::uniform, 2);
        const GSpec spec = GSpec::bernoulli(0.5);
        const auto exact = layer_collisions_exact(d, 4, spec);
        const double delta = 1.0 - 0.5 * (exact[1] + exact[2]);  // splits layers 2 and 3
        const uint32_t m_exact = 3;

        TournamentConfig tc;
        tc.m = 4;
        tc.gspec = spec;
        CollisionProfile prof;
        const size_t n_keys = 25;
        for (size_t k = 0; k < n_keys; ++k) {
            tc.key = SecretKey{0x1000 + k, 0x2000 + 31 * k};
            const auto one = layer_collisions_mc(SequenceModel::iid(d), tc, 120, 50, 91 + k);
            if (prof.mean.empty()) {
                prof = one;
            } else {
                for (size_t l = 0; l < prof.mean.size(); ++l) prof.mean[l] += one.mean[l];
            }
        }
        for (size_t l = 0; l < prof.mean.size(); ++l) prof.mean[l] /= static_cast<double>(n_keys);
        CHECK(detect_M(prof, delta) == m_exact);
    }
}

TEST_CASE("isotonic projection") {
    const auto out = isotonic_non_decreasing({0.1, 0.3, 0.25, 0.5, 0.45, 0.45});
    for (size_t i = 1; i < out.size(); ++i) CHECK(out[i] >= out[i - 1]);
    CHECK(out[0] == doctest::Approx(0.1));
    CHECK(out[1] == doctest::Approx(0.275));
    CHECK(out[2] == doctest::Approx(0.275));
}

TEST_CASE("collision profile serialization") {
    CollisionProfile p;
    p.mean = {0.25, 0.5};
    p.se = {0.01, 0.02};
    p.n_samples = 100;
    p.n_positions = 10;
    const std::string csv = p.to_csv();
    CHECK(csv.find("t,layer,C,stderr") == 0);
    CHECK(csv.find("-1,1,0.25,0.01") != std::string::npos);
    const std::string js = p.to_json();
    CHECK(js.find("\"C\":0.5") != std::string::npos);
}
