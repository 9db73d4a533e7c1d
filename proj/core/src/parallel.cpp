#include "ecoperceiver/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace ecp {

namespace {
std::atomic<int> g_threads{1};
}

int num_threads() { return g_threads.load(std::memory_order_relaxed); }

void set_num_threads(int n) { g_threads.store(std::max(1, n), std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    const int workers = num_threads();
    if (workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const int used = static_cast<int>(std::min<int64_t>(workers, n));
    const int64_t chunk = (n + used - 1) / used;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(used - 1));
    for (int w = 1; w < used; ++w) {
        int64_t b = w * chunk;
        int64_t e = std::min<int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min<int64_t>(chunk, n));
    for (auto& t : pool) t.join();
}

}  // namespace ecp
