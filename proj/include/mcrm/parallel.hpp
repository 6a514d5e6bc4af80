#pragma once

#include <cstddef>
#include <functional>

namespace mcrm {

/// Worker count from MCRM_THREADS (default: hardware concurrency, at least 1).
unsigned default_thread_count();

/// Calls body(i) for i in [0, n) on up to `threads` workers using contiguous
/// chunks. Callers write results by index, so output never depends on scheduling.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0);

}  // namespace mcrm
