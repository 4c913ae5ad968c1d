// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/kernels.hpp"

#include <cstdlib>

#include "twl/error.hpp"

namespace twl::kernels {

bool avx2_available() {
#if defined(TWL_BUILD_AVX2) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Kernels& by_name(const std::string& name) {
    if (name == "scalar") return scalar_kernels;
#if defined(TWL_BUILD_AVX2)
    if (name == "avx2") {
        if (!avx2_available()) throw ParamError("TWL_SIMD: avx2 not supported on this CPU");
        return avx2_kernels;
    }
#endif
    throw ParamError("TWL_SIMD: unknown kernel set '" + name + "'");
}

namespace {
const Kernels* select() {
    if (const char* env = std::getenv("TWL_SIMD")) {
        std::string s(env);
        if (!s.empty() && s != "auto") return &by_name(s);
    }
#if defined(TWL_BUILD_AVX2)
    if (avx2_available()) return &avx2_kernels;
#endif
    return &scalar_kernels;
}
}  // namespace

const Kernels& active() {
    static const Kernels* chosen = select();
    return *chosen;
}

}  // namespace twl::kernels
