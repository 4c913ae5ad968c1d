// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace twl {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument or configuration value. The message names the offending field.
class ParamError : public Error {
public:
    explicit ParamError(const std::string& what) : Error(what) {}
};

/// A requested exact computation exceeds the enumeration budget.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(what) {}
};

/// Configuration file / CLI errors (exit code 1 in the CLI).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace twl
