#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace eqa {

// Number of workers to use for `requested` (0 = hardware concurrency).
unsigned resolve_jobs(unsigned requested);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots by the caller so the output does not depend on
// scheduling. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace eqa
