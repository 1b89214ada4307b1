#pragma once

#include <cstddef>
#include <functional>

namespace freestop {

// Worker count: FREESTOP_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
unsigned thread_count();

// Calls body(i) for i in [0, n). Iterations must be independent; the first
// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace freestop
