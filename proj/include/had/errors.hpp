// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace had {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (zero counts, bad thresholds, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation precondition (mismatched dimensions, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Ill-conditioned or singular numerical problem.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InitializationError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

inline void require(bool cond, const std::string &msg) {
    if (!cond) throw ContractViolation(msg);
}

} // namespace had
