#pragma once

#include <cstddef>
#include <functional>

namespace asts {

// Worker count from ASTS_THREADS (default 1, clamped to [1, 64]).
int thread_count();

// Runs body(chunk, begin, end) over contiguous chunks of [0, n); chunk order is
// fixed so callers can merge per-chunk results deterministically.
void parallel_chunks(std::size_t n, int chunks, const std::function<void(int, std::size_t, std::size_t)>& body);

}  // namespace asts
