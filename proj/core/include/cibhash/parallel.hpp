#pragma once

#include <cstddef>
#include <functional>

namespace cibhash {

/// Worker count: CIBHASH_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
std::size_t thread_count();

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// fn(begin, end) on each. Chunk boundaries depend only on n and threads, so
/// any per-chunk output merged in chunk order is deterministic.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cibhash
