// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>

namespace twl {

/// Shortest round-trip decimal representation; keeps emitted CSV/JSON byte-stable
/// for identical doubles regardless of locale or printf quirks.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace twl
