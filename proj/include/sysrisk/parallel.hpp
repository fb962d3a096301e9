#pragma once

#include <cstddef>
#include <functional>

namespace sysrisk {

/// Worker count: SYSRISK_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs fn(0) .. fn(n-1), possibly concurrently. The first exception thrown by
/// any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sysrisk
