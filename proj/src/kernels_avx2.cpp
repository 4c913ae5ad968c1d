// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include <immintrin.h>

#include "twl/kernels.hpp"
#include "twl/prf.hpp"

namespace twl::kernels {
namespace {

// 64-bit low multiply by a broadcast constant (AVX2 has no vpmullq).
inline __m256i mullo64(__m256i a, uint64_t c) {
    const __m256i b = _mm256_set1_epi64x(static_cast<long long>(c));
    const __m256i lo = _mm256_mul_epu32(a, b);
    const __m256i hi1 = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), b);
    const __m256i hi2 = _mm256_mul_epu32(a, _mm256_srli_epi64(b, 32));
    return _mm256_add_epi64(lo, _mm256_slli_epi64(_mm256_add_epi64(hi1, hi2), 32));
}

inline __m256i fmix64_vec(__m256i z) {
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 30));
    z = mullo64(z, 0xBF58476D1CE4E5B9ULL);
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 27));
    z = mullo64(z, 0x94D049BB133111EBULL);
    z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
    return z;
}

// Exact conversion of the 52-bit hash prefix to double, matching the scalar cast.
inline __m256d u01_vec(__m256i h) {
    const __m256i frac = _mm256_srli_epi64(h, 12);
    const __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);  // 2^52
    const __m256d v = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(frac, magic)),
                                    _mm256_set1_pd(0x1.0p52));
    return _mm256_mul_pd(v, _mm256_set1_pd(0x1.0p-52));
}

template <bool kBernoulli>
inline void g_row_avx2_impl(uint64_t lane, uint32_t token0, size_t n, double p, double* out) {
    const size_t n4 = n & ~size_t{3};
    const uint64_t t0 = static_cast<uint64_t>(token0) * prf::kTokenMul;
    __m256i tok = _mm256_set_epi64x(
        static_cast<long long>(t0 + 3 * prf::kTokenMul), static_cast<long long>(t0 + 2 * prf::kTokenMul),
        static_cast<long long>(t0 + prf::kTokenMul), static_cast<long long>(t0));
    const __m256i step = _mm256_set1_epi64x(static_cast<long long>(4 * prf::kTokenMul));
    const __m256i lane_v = _mm256_set1_epi64x(static_cast<long long>(lane));
    const __m256d ones = _mm256_set1_pd(1.0);
    const __m256d pv = _mm256_set1_pd(p);
    for (size_t i = 0; i < n4; i += 4) {
        const __m256i h = fmix64_vec(_mm256_xor_si256(lane_v, tok));
        const __m256d u = u01_vec(h);
        if constexpr (kBernoulli) {
            _mm256_storeu_pd(out + i, _mm256_and_pd(_mm256_cmp_pd(u, pv, _CMP_LT_OQ), ones));
        } else {
            _mm256_storeu_pd(out + i, u);
        }
        tok = _mm256_add_epi64(tok, step);
    }
    for (size_t i = n4; i < n; ++i) {
        const uint64_t h = prf::fmix64(lane ^ ((static_cast<uint64_t>(token0) + i) * prf::kTokenMul));
        const double u = static_cast<double>(h >> 12) * 0x1.0p-52;
        out[i] = kBernoulli ? ((u < p) ? 1.0 : 0.0) : u;
    }
}

void g_row_bernoulli_avx2(uint64_t lane, uint32_t token0, size_t n, double p, double* out) {
    g_row_avx2_impl<true>(lane, token0, n, p, out);
}

void g_row_uniform_avx2(uint64_t lane, uint32_t token0, size_t n, double* out) {
    g_row_avx2_impl<false>(lane, token0, n, 0.0, out);
}

// Horizontal reduce in the fixed (l0+l1)+(l2+l3) order shared with the scalar path.
inline double reduce4(__m256d acc) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot_avx2(const double* a, const double* b, size_t n) {
    const size_t n4 = n & ~size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < n4; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    double s = reduce4(acc);
    for (size_t i = n4; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq_avx2(const double* a, size_t n) { return dot_avx2(a, a, n); }

double update_and_sumsq_avx2(double* d, const double* g, size_t n, double base) {
    const size_t n4 = n & ~size_t{3};
    const __m256d base_v = _mm256_set1_pd(base);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < n4; i += 4) {
        const __m256d w =
            _mm256_mul_pd(_mm256_loadu_pd(d + i), _mm256_add_pd(base_v, _mm256_loadu_pd(g + i)));
        _mm256_storeu_pd(d + i, w);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(w, w));
    }
    double s = reduce4(acc);
    for (size_t i = n4; i < n; ++i) {
        const double w = d[i] * (base + g[i]);
        d[i] = w;
        s += w * w;
    }
    return s;
}

}  // namespace

const Kernels avx2_kernels = {
    g_row_bernoulli_avx2, g_row_uniform_avx2, dot_avx2, sumsq_avx2, update_and_sumsq_avx2, "avx2",
};

}  // namespace twl::kernels
