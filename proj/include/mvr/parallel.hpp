#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mvr {

// Global worker cap. 0 means hardware_concurrency. Set once by the CLI;
// tests leave it at the default.
void set_max_threads(int n);
int max_threads();

// Splits [0, n) into a fixed number of chunks (independent of the worker
// count) and runs fn(chunk_index, begin, end) for each. Chunks are claimed
// dynamically, so results that are accumulated per chunk and reduced in
// chunk order are identical for any worker count.
void parallel_chunks(std::size_t n, std::size_t n_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Convenience: parallel loop over [0, n) where iterations are independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mvr
