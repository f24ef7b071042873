#pragma once

#include <cstddef>
#include <functional>

namespace pjfit {

// Worker count for read-only scoring: PJFIT_THREADS if set to a positive
// integer, else the hardware concurrency.
std::size_t thread_count();

// Calls fn(i) for every i in [0, n). Each index is visited exactly once, so
// writes to per-index slots stay deterministic regardless of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pjfit
