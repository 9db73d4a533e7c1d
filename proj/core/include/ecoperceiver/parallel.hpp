#pragma once

#include <cstdint>
#include <functional>

namespace ecp {

// Global worker count for the heavy tensor kernels. Work is split into
// contiguous row ranges, one per worker, so every output element is written
// by exactly one thread and results are bitwise identical for a fixed
// thread count. Defaults to 1 (fully serial).
int num_threads();
void set_num_threads(int n);

// Runs fn(begin, end) over [0, n) split across num_threads() workers.
// Serial when num_threads() == 1 or n is small.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace ecp
