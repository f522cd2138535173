// Copyright 2026 The sparsesplat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ssplat {

/// Worker count used by parallel_for. Defaults to SSPLAT_THREADS when set,
/// else the hardware concurrency.
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

/// Runs fn(i) for i in [0, n). Work items are claimed dynamically, so fn must
/// only write state owned by item i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

} // namespace ssplat
