#pragma once

#include <cstddef>
#include <functional>

namespace bt {

// Worker count: BIAS_TRACER_THREADS when set to a positive integer, else the
// number of logical cores.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index is executed exactly once; callers write
// results into per-index slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bt
