// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "twl/collision.hpp"
#include "twl/scoring.hpp"
#include "twl/theory.hpp"

namespace twl {

struct ModelConfig {
    std::string kind = "zipf";  // uniform | zipf | two_point | shift | explicit | markov
    size_t n = 1000;
    double zipf_s = 1.1;
    double two_point_q = 0.9;  // two_point: mass on token 0; shift: on-path mass
    size_t branch = 1;         // shift/bursty: number of uniform successor tokens
    size_t open_every = 5;     // bursty: stride of open (high-entropy) positions
    std::vector<double> probs;                    // explicit
    std::vector<std::vector<double>> transition;  // markov rows
    double temperature = 1.0;

    SequenceModel build() const;
};

struct AttackSection {
    uint32_t n_layers = 10;
    std::string count_mode = "initial_pool";  // or per_layer
    size_t n_texts = 100;

    AttackConfig to_attack_config() const;
};

struct OptimalPSection {
    std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> empirical_p;  // p values to also evaluate empirically
};

/// Strictly parsed experiment configuration (unknown JSON keys are rejected).
struct ExperimentConfig {
    std::string kind = "sweep";  // sweep | clt | attack | validate | optimal_p
    ModelConfig model;
    GSpec gspec = GSpec::bernoulli(0.5);
    std::vector<uint32_t> m_list = {30};
    size_t T = 100;
    size_t n_texts = 1000;
    size_t n_unwatermarked = 10000;
    size_t n_train = 200;
    double epsilon = 0.01;
    uint32_t H = 4;
    size_t prompt_T = 0;  // unwatermarked prompt tokens seeding each text's context
    bool emit_texts = false;  // include generated token arrays in JSON reports
    uint64_t master_seed = 1;
    SecretKey key = SecretKey{0x0123456789ABCDEFULL, 0x0F1E2D3C4B5A6978ULL};
    double prior_w = 0.5;
    AttackSection attack;
    OptimalPSection optimal_p;
    int threads = 0;  // 0 = TWL_THREADS or hardware

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    void validate() const;
    uint32_t m_max() const;
    TournamentConfig tournament(uint32_t m) const;
};

// ---- reports ----

struct SweepRow {
    uint32_t m = 0;
    std::string score_kind;  // "mean" | "bayesian"
    std::string gspec;
    double epsilon = 0, tau = 0, tpr_emp = 0, tpr_theory = 0;
    size_t n_texts = 0, T = 0;
    uint64_t seed = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<double> layer_C;     // measured per-layer collision means at m_max
    std::vector<double> layer_C_se;
    std::vector<double> chat_mmax;   // trained collision estimate at m_max

    std::string to_csv() const;
    std::string to_json() const;
};

struct CltReport {
    double a2 = 0, a2_adjusted = 0, critical = 0;
    bool pass = false;
    bool clt_floor_violated = false;  // mT < 30
    size_t n = 0;
    uint32_t m = 0;
    size_t T = 0;
    std::vector<size_t> histogram;  // 20 equal-width bins over [min, max]
    double hist_lo = 0, hist_hi = 0;

    std::string to_csv() const;
    std::string to_json() const;
};

struct AttackRow {
    std::string phase;  // "baseline" | "attacked"
    uint32_t n_attack_layers = 0;
    double tpr = 0, mean_score_avg = 0, tau = 0;
};

struct AttackReport {
    std::vector<AttackRow> rows;
    double below_tau_fraction = 0.0;  // attacked texts scored below tau
    std::vector<std::vector<TokenId>> attacked_texts;  // filled when cfg.emit_texts

    std::string to_csv() const;
    std::string to_json() const;  // attacked texts serialize as arrays of token ids
};

struct ValidateRow {
    std::string assertion;
    double expected = 0, observed = 0, tolerance = 0;
    bool pass = false;
};

struct ScoreRow {
    std::string text_id;  // w<i> (watermarked) or u<i> (unwatermarked)
    std::string score_kind;
    double score = 0, threshold = 0;
    bool verdict = false;
};

struct ValidateReport {
    std::vector<ValidateRow> rows;
    std::vector<ScoreRow> scores;  // per-text verdicts at the empirical thresholds
    bool all_pass() const;

    std::string to_csv() const;
    std::string to_json() const;
    std::string scores_csv() const;  // text_id,score_kind,score,threshold,verdict
};

struct OptimalPRow {
    double p = 0, z_exact = 0, z_asymptotic = 0;
    double tpr_emp = -1.0;  // < 0 when not evaluated empirically
};

struct OptimalPReport {
    std::vector<OptimalPRow> rows;
    double p_star = 0.5;
    double a_mean = 0, a_sq_mean = 0;

    std::string to_csv() const;
    std::string to_json() const;
};

// ---- runners (deterministic under any thread count) ----

SweepReport run_sweep(const ExperimentConfig& cfg);
CltReport run_clt_check(const ExperimentConfig& cfg);
AttackReport run_attack_eval(const ExperimentConfig& cfg);
ValidateReport run_validate(const ExperimentConfig& cfg);
OptimalPReport run_optimal_p(const ExperimentConfig& cfg);

}  // namespace twl
