// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace twl::kernels {

// Hot inner loops of the sampler: hashing a contiguous token range into g-values
// and the dense reductions of the winner-distribution update. Scalar reference
// implementations and AVX2 variants are selected at runtime; both use the same
// 4-accumulator summation order so results are bit-identical across variants.

struct Kernels {
    // out[i] = bernoulli g-value (0.0/1.0) for token0+i under success probability p
    void (*g_row_bernoulli)(uint64_t lane, uint32_t token0, size_t n, double p, double* out);
    // out[i] = uniform g-value in [0,1) for token0+i
    void (*g_row_uniform)(uint64_t lane, uint32_t token0, size_t n, double* out);
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, size_t n);
    // sum_i a[i]^2
    double (*sumsq)(const double* a, size_t n);
    // d[i] *= (base + g[i]); returns sum of updated d[i]^2
    double (*update_and_sumsq)(double* d, const double* g, size_t n, double base);
    const char* name;
};

/// Active kernel set. Chosen once per process: TWL_SIMD={scalar,avx2,auto}
/// (default auto = best supported).
const Kernels& active();

/// Kernel set by name ("scalar" or "avx2"); throws if unavailable.
const Kernels& by_name(const std::string& name);

bool avx2_available();

extern const Kernels scalar_kernels;
#if defined(TWL_BUILD_AVX2)
extern const Kernels avx2_kernels;
#endif

}  // namespace twl::kernels
