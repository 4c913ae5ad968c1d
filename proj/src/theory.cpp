// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twl/error.hpp"
#include "twl/format.hpp"

namespace twl {

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955126;
constexpr double kInvSqrtPi = 0.5641895835477563;
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// erf via its Taylor series; converges quickly for |z| <= 3.
double erf_series(double z) {
    const double z2 = z * z;
    double term = z;
    double sum = z;
    for (int n = 1; n < 120; ++n) {
        term *= -z2 / n;
        const double add = term / (2 * n + 1);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return kTwoOverSqrtPi * sum;
}

// erfc for z >= 3 via the classical continued fraction
// erfc(z) = e^{-z^2}/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
// evaluated with the modified Lentz algorithm.
double erfc_cf(double z) {
    const double tiny = 1e-300;
    double f = tiny, c = f, d = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double a = k == 0 ? 1.0 : 0.5 * k;
        const double b = z;
        d = b + a * d;
        if (d == 0.0) d = tiny;
        c = b + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-z * z) * kInvSqrtPi * f;
}

double erfc_impl(double z) {
    if (z < 0.0) return 2.0 - erfc_impl(-z);
    if (z < 3.0) return 1.0 - erf_series(z);
    if (z > 27.0) return 0.0;  // below double underflow for erfc
    return erfc_cf(z);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * erfc_impl(-x / kSqrt2); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_icdf(double q) {
    if (!(q > 0.0 && q < 1.0)) throw ParamError("normal_icdf.q: must lie in (0,1)");
    // Abramowitz-Stegun 26.2.22 rational start (|error| < 3e-3), then Newton.
    const double qm = std::min(q, 1.0 - q);
    const double t = std::sqrt(-2.0 * std::log(qm));
    double x = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t * t);
    if (q < 0.5) x = -x;
    for (int it = 0; it < 6; ++it) {
        const double err = normal_cdf(x) - q;
        const double step = err / std::max(normal_pdf(x), 1e-300);
        x -= step;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(x))) break;
    }
    return x;
}

namespace {
double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1);
}
}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// ---- thresholds ----

double threshold_ms_closed(double eps, uint32_t m, size_t T, const GSpec& gspec) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("threshold_ms_closed.eps: must lie in (0, 0.5)");
    const double mT = static_cast<double>(m) * static_cast<double>(T);
    if (mT < 30.0) throw ParamError("threshold_ms_closed: mT >= 30 required for the CLT form");
    const double z = normal_icdf(1.0 - eps);
    if (gspec.is_bernoulli()) {
        if (gspec.p != 0.5)
            throw ParamError("threshold_ms_closed: closed form is stated for Bernoulli(0.5)");
        return 0.5 + z / (2.0 * std::sqrt(mT));
    }
    return 0.5 + z / std::sqrt(12.0 * mT);
}

double threshold_bs_closed_logodds(double eps, const ChatEstimate& chat, double alpha,
                                   const GSpec& gspec, uint32_t m, size_t T) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("threshold_bs_closed.eps: must lie in (0, 0.5)");
    if (!(alpha > 0.0)) throw ParamError("threshold_bs_closed.alpha: must be > 0");
    if (chat.chat.size() < m) throw ParamError("threshold_bs_closed: chat has fewer than m layers");
    CollisionProfile dummy;  // unwatermarked moments do not involve data-side C
    dummy.mean.assign(chat.chat.begin(), chat.chat.begin() + m);
    dummy.n_positions = T;
    ChatEstimate trunc;
    trunc.chat.assign(chat.chat.begin(), chat.chat.begin() + m);
    trunc.n_train = chat.n_train;
    const ScoreMoments mo = bs_moments(dummy, trunc, gspec, Condition::unwatermarked);
    return std::log(alpha) + mo.mean + normal_icdf(1.0 - eps) * std::sqrt(std::max(0.0, mo.variance));
}

double threshold_bs_closed(double eps, const ChatEstimate& chat, double alpha, const GSpec& gspec,
                           uint32_t m, size_t T) {
    const double logodds = threshold_bs_closed_logodds(eps, chat, alpha, gspec, m, T);
    return 1.0 - 1.0 / (1.0 + std::exp(logodds));
}

// ---- mean score ----

namespace {

// Per-entry watermarked success probability for Bernoulli(p) at collision c.
inline double bern_success(double p, double c) { return p + p * (1.0 - p) * (1.0 - c); }

void check_profile(const CollisionProfile& prof) {
    if (prof.layers() == 0) throw ParamError("collision profile: no layers");
    if (prof.n_positions == 0) throw ParamError("collision profile: n_positions (T) not set");
    for (double c : prof.mean)
        if (!(c >= 0.0 && c <= 1.0)) throw ParamError("collision profile: C outside [0,1]");
}

}  // namespace

ScoreMoments ms_moments(const CollisionProfile& C, const GSpec& gspec, Condition cond) {
    check_profile(C);
    const size_t m = C.layers();
    const double T = static_cast<double>(C.n_positions);
    const double mT = static_cast<double>(m) * T;

    ScoreMoments out;
    out.condition = cond;
    out.kind = ScoreKind::mean;
    if (cond == Condition::unwatermarked) {
        out.mean = gspec.is_bernoulli() ? gspec.p : 0.5;
        const double var_entry = gspec.is_bernoulli() ? gspec.p * (1.0 - gspec.p) : 1.0 / 12.0;
        out.variance = var_entry / mT;
        return out;
    }

    // Sum the per-entry watermarked mean/variance over (t, l); use per-position
    // collisions when recorded, otherwise the per-layer means.
    double sum_mean = 0.0, sum_var = 0.0;
    auto accumulate = [&](double c, double count) {
        if (gspec.is_bernoulli()) {
            const double pw = bern_success(gspec.p, c);
            sum_mean += count * pw;
            sum_var += count * pw * (1.0 - pw);
        } else {
            const double pw = (4.0 - c) / 6.0;
            sum_mean += count * pw;
            sum_var += count * (pw * (1.0 - pw) - 1.0 / 6.0);
        }
    };
    if (C.has_per_position()) {
        for (size_t t = 0; t < C.n_positions; ++t)
            for (size_t l = 0; l < m; ++l) accumulate(C.per_position[t * m + l], 1.0);
    } else {
        for (size_t l = 0; l < m; ++l) accumulate(C.mean[l], T);
    }
    out.mean = sum_mean / mT;
    out.variance = sum_var / (mT * mT);
    return out;
}

double ms_tpr(double eps, const CollisionProfile& C, const GSpec& gspec, uint32_t m, size_t T) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("ms_tpr.eps: must lie in (0, 0.5)");
    if (C.layers() < m) throw ParamError("ms_tpr: profile has fewer than m layers");
    CollisionProfile trunc;
    trunc.mean.assign(C.mean.begin(), C.mean.begin() + m);
    trunc.se.assign(m, 0.0);
    trunc.n_positions = T;
    if (C.has_per_position() && C.n_positions == T) {
        trunc.per_position.resize(T * m);
        for (size_t t = 0; t < T; ++t)
            for (size_t l = 0; l < m; ++l)
                trunc.per_position[t * m + l] = C.per_position[t * C.layers() + l];
    }
    const ScoreMoments mo = ms_moments(trunc, gspec, Condition::watermarked);
    const double tau = threshold_ms_closed(eps, m, T, gspec);
    if (mo.variance <= 0.0) return mo.mean > tau ? 1.0 : eps;
    return 1.0 - normal_cdf((tau - mo.mean) / std::sqrt(mo.variance));
}

std::pair<TheoryCurve, TheoryCurveConstants> ms_tpr_curve(double eps,
                                                          const std::vector<double>& layer_C,
                                                          size_t T, uint32_t m_max,
                                                          const GSpec& gspec, double delta_M) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("ms_tpr_curve.eps: must lie in (0, 0.5)");
    if (layer_C.empty()) throw ParamError("ms_tpr_curve: empty collision sequence");
    if (gspec.is_bernoulli() && gspec.p != 0.5)
        throw ParamError("ms_tpr_curve: stated for Bernoulli(0.5) and Uniform g-values");
    for (size_t l = 0; l < layer_C.size(); ++l) {
        if (!(layer_C[l] >= 0.0 && layer_C[l] <= 1.0))
            throw ParamError("ms_tpr_curve: C outside [0,1] at layer " + std::to_string(l + 1));
        if (l > 0 && layer_C[l] < layer_C[l - 1] - 1e-12)
            throw ParamError("ms_tpr_curve: collision sequence must be non-decreasing (layer " +
                             std::to_string(l + 1) + ")");
    }

    uint32_t M = 0;  // 0 = never saturates within the sequence
    for (size_t l = 0; l < layer_C.size(); ++l) {
        if (layer_C[l] >= 1.0 - delta_M) {
            M = static_cast<uint32_t>(l + 1);
            break;
        }
    }
    if (M == 0 && m_max > layer_C.size())
        throw ParamError("ms_tpr_curve: unsaturated profile shorter than m_max");

    const uint32_t span = M > 0 ? M : static_cast<uint32_t>(layer_C.size());
    double sum_a = 0.0, sum_a2 = 0.0;
    for (uint32_t l = 0; l < span; ++l) {
        const double a = 1.0 - layer_C[l];
        sum_a += a;
        sum_a2 += a * a;
    }
    const double Ea = sum_a / span, Ea2 = sum_a2 / span;
    const double Td = static_cast<double>(T);
    const double z = normal_icdf(1.0 - eps);

    TheoryCurveConstants k;
    k.M = M;
    if (gspec.is_bernoulli()) {
        k.A_hat = 2.0 * z * std::sqrt(Td);
        k.A = Td * Ea;
        k.B = std::sqrt(Td * (4.0 - Ea2));
        k.C_big = 4.0 * Td;
    } else {
        k.A_hat = std::sqrt(3.0) * z * std::sqrt(Td);
        k.A = Td * Ea;
        k.B = std::sqrt(Td * (3.0 - Ea2));
        k.C_big = 3.0 * Td;
    }
    k.B_hat = Td * sum_a;
    k.D_hat = Td * sum_a2;

    TheoryCurve curve;
    curve.epsilon = eps;
    curve.gspec = gspec;
    curve.kind = ScoreKind::mean;
    curve.tpr.resize(m_max);
    for (uint32_t m = 1; m <= m_max; ++m) curve.tpr[m - 1] = ms_tpr_curve_at(k, m);
    return {curve, k};
}

double ms_tpr_curve_at(const TheoryCurveConstants& k, double m) {
    double zarg;
    if (k.M > 0 && m >= static_cast<double>(k.M))
        zarg = (k.A_hat * std::sqrt(m) - k.B_hat) / std::sqrt(k.C_big * m - k.D_hat);
    else
        zarg = k.A_hat / k.B - (k.A / k.B) * std::sqrt(m);
    return 1.0 - normal_cdf(zarg);
}

std::string TheoryCurve::to_csv() const {
    std::string out = "m,tpr_theory,score_kind,gspec,epsilon\n";
    const char* kind_name = kind == ScoreKind::mean ? "mean" : "bayesian";
    for (size_t i = 0; i < tpr.size(); ++i)
        out += std::to_string(i + 1) + "," + fmt_double(tpr[i]) + "," + kind_name + "," +
               gspec.name() + "," + fmt_double(epsilon) + "\n";
    return out;
}

// ---- Bayesian score ----

IIntegrals i_integrals(double chat) {
    if (!(chat >= 0.0 && chat <= 1.0)) throw ParamError("i_integrals.chat: must lie in [0,1]");
    IIntegrals out;
    const double eta = 1.0 - chat;
    if (eta == 0.0) return out;  // log argument identically 1
    if (eta < 1e-7) {            // series around chat = 1 avoids cancellation
        out.I1 = -eta * eta / 6.0;
        out.I2 = eta / 6.0 - eta * eta / 12.0 + eta * eta * eta / 30.0;
        out.I3 = eta * eta / 3.0;
        out.I4 = eta * eta / 6.0 - eta * eta * eta / 10.0;
        return out;
    }
    // Substitution u = chat + 2(1-chat)x maps [0,1] to [chat, 2-chat].
    const double k = 2.0 * eta;
    const double b = 2.0 - chat;
    const auto lnu = [](double u) { return std::log1p(u - 1.0); };
    const auto F1 = [&](double u) { return u <= 0.0 ? 0.0 : u * lnu(u) - u; };
    const auto F2 = [&](double u) {
        return u <= 0.0 ? 0.0 : 0.5 * u * u * lnu(u) - 0.25 * u * u;
    };
    const auto F3 = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double L = lnu(u);
        return u * L * L - 2.0 * u * L + 2.0 * u;
    };
    const auto F4 = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double L = lnu(u);
        return 0.5 * u * u * L * L - 0.5 * u * u * L + 0.25 * u * u;
    };
    const double d1 = F1(b) - F1(chat);
    const double d3 = F3(b) - F3(chat);
    out.I1 = d1 / k;
    out.I2 = ((F2(b) - F2(chat)) - chat * d1) / (k * k);
    out.I3 = d3 / k;
    out.I4 = ((F4(b) - F4(chat)) - chat * d3) / (k * k);
    return out;
}

IIntegrals i_integrals_quadrature(double chat, double tol) {
    if (!(chat >= 0.0 && chat <= 1.0)) throw ParamError("i_integrals.chat: must lie in [0,1]");
    IIntegrals out;
    const double eta = 1.0 - chat;
    if (eta == 0.0) return out;
    const auto logarg = [&](double x) { return std::log(chat + 2.0 * eta * x); };
    // The integrand has an integrable log singularity at x = 0 when chat = 0;
    // integrate from a below-tolerance offset (analytic remainder < 1e-10).
    const double lo = chat == 0.0 ? 1e-13 : 0.0;
    out.I1 = adaptive_simpson([&](double x) { return logarg(x); }, lo, 1.0, tol);
    out.I2 = adaptive_simpson([&](double x) { return x * logarg(x); }, lo, 1.0, tol);
    out.I3 = adaptive_simpson([&](double x) { const double L = logarg(x); return L * L; }, lo, 1.0, tol);
    out.I4 = adaptive_simpson([&](double x) { const double L = logarg(x); return x * L * L; }, lo, 1.0, tol);
    return out;
}

ScoreMoments bs_moments(const CollisionProfile& C, const ChatEstimate& chat, const GSpec& gspec,
                        Condition cond) {
    check_profile(C);
    const size_t m = C.layers();
    if (chat.chat.size() != m)
        throw ParamError("bs_moments: chat layer count does not match the profile");
    if (gspec.is_bernoulli() && gspec.p != 0.5)
        throw ParamError("bs_moments: Bayesian likelihood is stated for Bernoulli(0.5)");
    const double T = static_cast<double>(C.n_positions);

    ScoreMoments out;
    out.condition = cond;
    out.kind = ScoreKind::bayesian;
    double sum_mean = 0.0, sum_var = 0.0;
    for (size_t l = 0; l < m; ++l) {
        const double ch = chat.chat[l];
        if (!(ch >= 0.0 && ch <= 1.0)) throw ParamError("bs_moments: chat outside [0,1]");
        double mean_e, var_e;
        if (gspec.is_bernoulli()) {
            const double L1 = std::log1p((1.0 - ch) / 2.0);   // ln((3-ch)/2)
            const double L0 = std::log1p(-(1.0 - ch) / 2.0);  // ln((1+ch)/2)
            const double pw =
                cond == Condition::watermarked ? (3.0 - C.mean[l]) / 4.0 : 0.5;
            mean_e = (1.0 - pw) * L0 + pw * L1;
            var_e = (1.0 - pw) * L0 * L0 + pw * L1 * L1 - mean_e * mean_e;
        } else {
            const IIntegrals ii = i_integrals(ch);
            if (cond == Condition::watermarked) {
                const double c = C.mean[l];
                mean_e = c * ii.I1 + 2.0 * (1.0 - c) * ii.I2;
                var_e = c * ii.I3 + 2.0 * (1.0 - c) * ii.I4 - mean_e * mean_e;
            } else {
                mean_e = ii.I1;
                var_e = ii.I3 - ii.I1 * ii.I1;
            }
        }
        sum_mean += T * mean_e;
        sum_var += T * std::max(0.0, var_e);
    }
    out.mean = sum_mean;
    out.variance = sum_var;
    return out;
}

double bs_tpr(double eps, const CollisionProfile& C, const ChatEstimate& chat, double alpha,
              const GSpec& gspec, uint32_t m, size_t T) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("bs_tpr.eps: must lie in (0, 0.5)");
    if (!(alpha > 0.0)) throw ParamError("bs_tpr.alpha: must be > 0");
    if (C.layers() < m || chat.chat.size() < m)
        throw ParamError("bs_tpr: profile/chat have fewer than m layers");
    CollisionProfile cp;
    cp.mean.assign(C.mean.begin(), C.mean.begin() + m);
    cp.n_positions = T;
    ChatEstimate ch;
    ch.chat.assign(chat.chat.begin(), chat.chat.begin() + m);
    ch.n_train = chat.n_train;

    const ScoreMoments w = bs_moments(cp, ch, gspec, Condition::watermarked);
    const ScoreMoments u = bs_moments(cp, ch, gspec, Condition::unwatermarked);
    // alpha cancels between the threshold and the watermarked score CDF,
    // hence it does not appear below.
    const double z = normal_icdf(1.0 - eps);
    const double num = u.mean + z * std::sqrt(std::max(0.0, u.variance)) - w.mean;
    if (w.variance <= 0.0) {
        if (std::abs(num) < 1e-12) return eps;
        return num < 0.0 ? 1.0 : 0.0;
    }
    return 1.0 - normal_cdf(num / std::sqrt(w.variance));
}

// ---- optimal Bernoulli parameter ----

OptimalPScan optimal_p_scan(double eps, uint32_t m, size_t T, double a_mean, double a_sq_mean,
                            const std::vector<double>& grid) {
    if (grid.empty()) throw ParamError("optimal_p_scan.grid: empty grid");
    if (!(eps > 0.0 && eps < 0.5)) throw ParamError("optimal_p_scan.eps: must lie in (0, 0.5)");
    if (!(a_mean >= 0.0 && a_mean <= 1.0)) throw ParamError("optimal_p_scan.a_mean: must lie in [0,1]");
    if (!(a_sq_mean >= a_mean * a_mean - 1e-12 && a_sq_mean <= a_mean + 1e-12))
        throw ParamError("optimal_p_scan.a_sq_mean: inconsistent with a_mean");
    const double mT = static_cast<double>(m) * static_cast<double>(T);
    const double z = normal_icdf(1.0 - eps);
    const double S = mT * a_mean;

    OptimalPScan out;
    out.z_exact.reserve(grid.size());
    out.z_asymptotic.reserve(grid.size());
    double best = std::numeric_limits<double>::infinity();
    double best_dist = 1.0;
    for (double p : grid) {
        if (!(p > 0.0 && p < 1.0)) throw ParamError("optimal_p_scan.grid: p outside (0,1)");
        const double q = p * (1.0 - p);
        const double num = std::sqrt(mT) * z * std::sqrt(q) - q * S;
        const double V = mT * (q + q * (1.0 - 2.0 * p) * a_mean - q * q * a_sq_mean);
        const double zex = V > 0.0 ? num / std::sqrt(V) : std::numeric_limits<double>::infinity();
        out.z_exact.push_back(zex);
        out.z_asymptotic.push_back(z - std::sqrt(mT) * a_mean * std::sqrt(q));
        const double dist = std::abs(p - 0.5);
        if (zex < best || (zex == best && dist < best_dist)) {
            best = zex;
            best_dist = dist;
            out.p_star = p;
        }
    }
    return out;
}

// ---- Anderson-Darling ----

AndersonDarlingResult anderson_darling(std::vector<double> samples, double alpha) {
    const size_t n = samples.size();
    if (n < 20) throw ParamError("anderson_darling: need >= 20 samples");
    double critical;
    if (alpha == 0.10)
        critical = 0.631;
    else if (alpha == 0.05)
        critical = 0.752;
    else if (alpha == 0.025)
        critical = 0.873;
    else if (alpha == 0.01)
        critical = 1.035;
    else
        throw ParamError("anderson_darling.alpha: supported levels are 0.10, 0.05, 0.025, 0.01");

    std::sort(samples.begin(), samples.end());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    if (ss <= 0.0) throw ParamError("anderson_darling: degenerate (constant) sample");
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    double a2 = -static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const double zi = std::clamp(normal_cdf((samples[i] - mean) / sd), 1e-300, 1.0 - 1e-16);
        const double zr = std::clamp(normal_cdf((samples[n - 1 - i] - mean) / sd), 1e-300, 1.0 - 1e-16);
        a2 -= (2.0 * static_cast<double>(i + 1) - 1.0) / static_cast<double>(n) *
              (std::log(zi) + std::log1p(-zr));
    }
    AndersonDarlingResult res;
    res.a2 = a2;
    res.a2_adjusted = a2 * (1.0 + 0.75 / static_cast<double>(n) +
                            2.25 / (static_cast<double>(n) * static_cast<double>(n)));
    res.critical = critical;
    res.pass = res.a2_adjusted < critical;
    return res;
}

}  // namespace twl
