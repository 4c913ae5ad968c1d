// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "twl/collision.hpp"

namespace twl {

// ---- Normal distribution primitives ----
// cdf: Taylor series below |z| = 3, Lentz continued fraction in the tails;
// absolute error < 1e-13 on [-8, 8]. icdf: Abramowitz-Stegun 26.2.22 initial
// guess refined by safeguarded Newton; verified to < 1e-9 against an
// independent oracle in the tests.

double normal_cdf(double x);
double normal_pdf(double x);
double normal_icdf(double q);  // ParamError outside (0,1)

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

enum class Condition { watermarked, unwatermarked };
enum class ScoreKind { mean, bayesian };

struct ScoreMoments {
    double mean = 0.0;
    double variance = 0.0;
    Condition condition = Condition::watermarked;
    ScoreKind kind = ScoreKind::mean;
};

// ---- Closed-form detection thresholds ----

/// Mean-score threshold at FPR = eps: 1/2 + icdf(1-eps)/(2 sqrt(mT)) for
/// Bernoulli(0.5) g-values, 1/2 + icdf(1-eps)/sqrt(12 mT) for Uniform(0,1).
double threshold_ms_closed(double eps, uint32_t m, size_t T, const GSpec& gspec);

/// Bayesian-score threshold at FPR = eps from the unwatermarked log-LLR moments:
/// tau = 1 - 1/(1 + alpha exp(E + icdf(1-eps) sqrt(V))).
double threshold_bs_closed(double eps, const ChatEstimate& chat, double alpha, const GSpec& gspec,
                           uint32_t m, size_t T);
/// Same threshold on the log-odds scale: ln(alpha) + E + icdf(1-eps) sqrt(V);
/// immune to sigmoid saturation for large |E|.
double threshold_bs_closed_logodds(double eps, const ChatEstimate& chat, double alpha,
                                   const GSpec& gspec, uint32_t m, size_t T);

// ---- Mean score theory ----

/// Moments of MS over T positions and the first m = C.layers() layers.
/// Watermarked per-entry success follows the single-layer watermarked g-value
/// law at the profile's collision values; unwatermarked is the base g law.
ScoreMoments ms_moments(const CollisionProfile& C, const GSpec& gspec, Condition cond);

/// Predicted TPR@FPR=eps for the mean score: 1 - cdf((tau - E)/sqrt(V)) using
/// the first m layers of the profile.
double ms_tpr(double eps, const CollisionProfile& C, const GSpec& gspec, uint32_t m, size_t T);

struct TheoryCurveConstants {
    double A_hat = 0, A = 0, B = 0, B_hat = 0, C_big = 0, D_hat = 0;
    uint32_t M = 0;  // saturation layer (0 when the profile never saturates)
};

struct TheoryCurve {
    std::vector<double> tpr;  // index i = layer count i+1
    double epsilon = 0.0;
    GSpec gspec;
    ScoreKind kind = ScoreKind::mean;

    std::string to_csv() const;  // m,tpr_theory,score_kind,gspec,epsilon
};

/// Piecewise closed-form MS TPR over m = 1..m_max from a non-decreasing
/// per-layer collision sequence. Below the saturation layer M the curve uses the
/// constant-moment form (A, B from E[a], E[a^2] averaged over layers <= M);
/// from M on it uses the exact saturated constants, so the two branches agree at
/// m = M and the m -> infinity limit is eps.
std::pair<TheoryCurve, TheoryCurveConstants> ms_tpr_curve(double eps,
                                                          const std::vector<double>& layer_C,
                                                          size_t T, uint32_t m_max,
                                                          const GSpec& gspec,
                                                          double delta_M = 1e-6);

/// Curve evaluation at an arbitrary layer count (e.g. m = 10^6).
double ms_tpr_curve_at(const TheoryCurveConstants& k, double m);

// ---- Bayesian score theory ----

struct IIntegrals {
    double I1 = 0, I2 = 0, I3 = 0, I4 = 0;
};

/// Analytic values of the four log-moment integrals of the Uniform Bayesian
/// likelihood at trained collision `chat` (integrable log singularity at 0).
IIntegrals i_integrals(double chat);
/// Independent quadrature route used for cross-checking the analytic forms.
IIntegrals i_integrals_quadrature(double chat, double tol = 1e-10);

/// Log-domain moments of the summed per-entry log-likelihood ratio, over T
/// positions and the first chat.size() layers. Data-side collisions C and
/// detector-side chat enter separately so mismatch experiments are possible.
ScoreMoments bs_moments(const CollisionProfile& C, const ChatEstimate& chat, const GSpec& gspec,
                        Condition cond);

/// Predicted Bayesian TPR@FPR=eps (alpha cancels between threshold and score CDF).
double bs_tpr(double eps, const CollisionProfile& C, const ChatEstimate& chat, double alpha,
              const GSpec& gspec, uint32_t m, size_t T);

// ---- Optimal Bernoulli parameter ----

struct OptimalPScan {
    double p_star = 0.5;                // argmin of the exact Z over the grid
    std::vector<double> z_exact;        // exact normal-deviate objective per grid p
    std::vector<double> z_asymptotic;   // large-mT approximation (peaks at 1/2)
};

/// Scans Z(p) = (sqrt(mT) icdf(1-eps) sqrt(p(1-p)) - p(1-p) S) / sqrt(V(p)) with
/// S = mT E[a] and V(p) the watermarked Bernoulli(p) variance under the supplied
/// (E[a], E[a^2]) collision statistics. Lower Z means higher predicted TPR.
OptimalPScan optimal_p_scan(double eps, uint32_t m, size_t T, double a_mean, double a_sq_mean,
                            const std::vector<double>& grid);

// ---- Normality testing ----

struct AndersonDarlingResult {
    double a2 = 0.0;           // case-3 statistic (mean and variance estimated)
    double a2_adjusted = 0.0;  // A^2 (1 + 0.75/n + 2.25/n^2)
    double critical = 0.0;
    bool pass = false;
};

/// Anderson-Darling normality test with estimated parameters; alpha must be one
/// of 0.10, 0.05, 0.025, 0.01.
AndersonDarlingResult anderson_darling(std::vector<double> samples, double alpha = 0.05);

}  // namespace twl
