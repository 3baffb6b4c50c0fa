#pragma once

#include <cstddef>
#include <functional>

namespace cpi {

/// Worker count from CPI_WORKERS, falling back to the hardware concurrency.
int default_workers();

/// Runs fn(i) for i in [0, n). With workers > 1 the index range is split into
/// contiguous blocks across threads; results must be written to preallocated
/// per-index slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace cpi
