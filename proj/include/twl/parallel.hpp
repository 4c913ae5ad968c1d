// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace twl {

/// Thread count resolution: explicit > TWL_THREADS > hardware concurrency.
inline unsigned resolve_threads(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("TWL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Index-parallel loop with static block partition. Workers touch disjoint
/// index ranges and results must be stored per index, so outputs are identical
/// for any thread count.
inline void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned k = static_cast<unsigned>(std::min<size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (unsigned w = 0; w < k; ++w) {
        pool.emplace_back([&, w]() {
            const size_t lo = n * w / k, hi = n * (w + 1) / k;
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace twl
