// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ssplat {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A render or benchmark cell would exceed the configured memory budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimization produced a non-finite value or diverged. `iteration` is -1
/// when raised outside the training loop.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string &what, std::int64_t iteration = -1)
        : std::runtime_error(iteration < 0 ? what : what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    std::int64_t iteration() const noexcept { return iteration_; }

private:
    std::int64_t iteration_;
};

enum class LoadErrorKind {
    Io,
    BadMagic,
    VersionMismatch,
    Truncated,
    Corrupt,
    WrongTag,
    DimensionMismatch,
};

const char *to_string(LoadErrorKind kind) noexcept;

/// Failure to read one of the on-disk formats. `offset` is the byte offset at
/// which the problem was detected, or -1 when not applicable.
class LoadError : public std::runtime_error {
public:
    LoadError(LoadErrorKind kind, const std::string &what, std::int64_t offset = -1);

    LoadErrorKind kind() const noexcept { return kind_; }
    std::int64_t offset() const noexcept { return offset_; }

private:
    LoadErrorKind kind_;
    std::int64_t offset_;
};

} // namespace ssplat
