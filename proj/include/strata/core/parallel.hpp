#pragma once

#include <cstddef>
#include <functional>

namespace strata::parallel {

// Process-wide cap on worker threads. Results never depend on this value:
// every parallel loop writes to index-addressed slots.
void set_max_threads(int n);
int max_threads() noexcept;

// Runs fn(i) for i in [0, count). Exceptions from workers are rethrown on
// the calling thread (the one from the lowest failing index).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace strata::parallel
