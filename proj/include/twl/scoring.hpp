// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "twl/collision.hpp"
#include "twl/gmatrix.hpp"
#include "twl/theory.hpp"

namespace twl {

/// Bayesian detector parameters: per-layer trained collisions, prior odds and
/// the log-clamp for Uniform g-values.
struct DetectorParams {
    ChatEstimate chat;
    double prior_w = 0.5;   // P(w); alpha = prior_w / (1 - prior_w)
    double g_floor = 1e-9;  // Uniform entries are clamped to [g_floor, 1] inside logs

    double alpha() const { return prior_w / (1.0 - prior_w); }
    void validate() const;
};

struct ScoreReport {
    double score = 0.0;
    ScoreKind kind = ScoreKind::mean;
    double threshold = 0.0;
    bool watermarked = false;  // verdict: score > threshold (strict)
};

/// (1/(Tm)) sum of all g-values.
double mean_score(const GMatrix& g);

/// Posterior probability of the watermark hypothesis: sigmoid of the summed
/// per-entry log-likelihood ratios plus the prior log-odds.
double bayesian_score(const GMatrix& g, const DetectorParams& params);
/// The same statistic before the sigmoid; the sigmoid is strictly increasing so
/// thresholding either form is equivalent, and log-odds do not saturate.
double bayesian_logodds(const GMatrix& g, const DetectorParams& params);

/// Conservative upper-quantile calibration: the ceil((1-eps)(n+1))-th order
/// statistic, so the empirical FPR on the calibration set is <= eps.
double calibrate_threshold_empirical(std::span<const double> unwatermarked_scores, double eps);

/// Verdict: watermarked iff score > tau (strict).
inline bool classify(double score, double tau) { return score > tau; }

struct TprResult {
    double tpr = 0.0;
    double tau = 0.0;
};

/// Empirical TPR at the empirically calibrated FPR = eps threshold.
TprResult tpr_at_fpr(std::span<const double> watermarked_scores,
                     std::span<const double> unwatermarked_scores, double eps);

}  // namespace twl
