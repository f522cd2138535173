// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssplat/errors.hpp"

namespace ssplat {

const char *to_string(LoadErrorKind kind) noexcept {
    switch (kind) {
    case LoadErrorKind::Io: return "io";
    case LoadErrorKind::BadMagic: return "bad-magic";
    case LoadErrorKind::VersionMismatch: return "version-mismatch";
    case LoadErrorKind::Truncated: return "truncated";
    case LoadErrorKind::Corrupt: return "corrupt";
    case LoadErrorKind::WrongTag: return "wrong-tag";
    case LoadErrorKind::DimensionMismatch: return "dimension-mismatch";
    }
    return "unknown";
}

LoadError::LoadError(LoadErrorKind kind, const std::string &what, std::int64_t offset)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what +
                         (offset >= 0 ? " (at byte offset " + std::to_string(offset) + ")" : std::string())),
      kind_(kind), offset_(offset) {}

} // namespace ssplat
