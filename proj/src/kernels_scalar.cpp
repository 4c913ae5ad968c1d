// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/kernels.hpp"
#include "twl/prf.hpp"

namespace twl::kernels {
namespace {

// Reference kernels. Reductions run four interleaved accumulators and reduce as
// (a0+a1)+(a2+a3) with a sequential tail, matching the AVX2 lane layout exactly.

void g_row_bernoulli_scalar(uint64_t lane, uint32_t token0, size_t n, double p, double* out) {
    for (size_t i = 0; i < n; ++i) {
        const uint64_t h = prf::fmix64(lane ^ ((static_cast<uint64_t>(token0) + i) * prf::kTokenMul));
        out[i] = (static_cast<double>(h >> 12) * 0x1.0p-52 < p) ? 1.0 : 0.0;
    }
}

void g_row_uniform_scalar(uint64_t lane, uint32_t token0, size_t n, double* out) {
    for (size_t i = 0; i < n; ++i) {
        const uint64_t h = prf::fmix64(lane ^ ((static_cast<uint64_t>(token0) + i) * prf::kTokenMul));
        out[i] = static_cast<double>(h >> 12) * 0x1.0p-52;
    }
}

double dot_scalar(const double* a, const double* b, size_t n) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    const size_t n4 = n & ~size_t{3};
    for (size_t i = 0; i < n4; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    double s = (acc0 + acc1) + (acc2 + acc3);
    for (size_t i = n4; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq_scalar(const double* a, size_t n) { return dot_scalar(a, a, n); }

double update_and_sumsq_scalar(double* d, const double* g, size_t n, double base) {
    double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
    const size_t n4 = n & ~size_t{3};
    for (size_t i = 0; i < n4; i += 4) {
        const double w0 = d[i] * (base + g[i]);
        const double w1 = d[i + 1] * (base + g[i + 1]);
        const double w2 = d[i + 2] * (base + g[i + 2]);
        const double w3 = d[i + 3] * (base + g[i + 3]);
        d[i] = w0;
        d[i + 1] = w1;
        d[i + 2] = w2;
        d[i + 3] = w3;
        acc0 += w0 * w0;
        acc1 += w1 * w1;
        acc2 += w2 * w2;
        acc3 += w3 * w3;
    }
    double s = (acc0 + acc1) + (acc2 + acc3);
    for (size_t i = n4; i < n; ++i) {
        const double w = d[i] * (base + g[i]);
        d[i] = w;
        s += w * w;
    }
    return s;
}

}  // namespace

const Kernels scalar_kernels = {
    g_row_bernoulli_scalar, g_row_uniform_scalar, dot_scalar, sumsq_scalar,
    update_and_sumsq_scalar, "scalar",
};

}  // namespace twl::kernels
