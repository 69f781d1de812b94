#pragma once

#include <cstddef>
#include <functional>

namespace cardioflow {

/// Number of worker threads used by parallel_for. 0 means hardware
/// concurrency.
void set_thread_count(int threads);
int thread_count();

/// Splits [0, n) into contiguous chunks, one per worker, and runs body on
/// each. Callers write results into per-index slots so the output does not
/// depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace cardioflow
