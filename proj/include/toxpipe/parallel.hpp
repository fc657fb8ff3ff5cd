// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace toxpipe {

/// Worker count used by parallel_for (default 1). Results never depend on it: work items write to
/// their own slots and reductions happen afterwards in index order.
void set_thread_count(unsigned n) noexcept;
unsigned thread_count() noexcept;

/// Runs body(i) for i in [0, n). Exceptions from workers are rethrown (first by index).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace toxpipe
