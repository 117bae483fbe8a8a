#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace sflab {

/// Worker count from SFLAB_WORKERS, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("SFLAB_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Runs fn(lo, hi) over a fixed contiguous partition of [0, n). Chunks write
/// disjoint state, so results do not depend on the worker count.
template <class F>
void parallel_chunks(std::size_t n, F&& fn) {
    const int w = worker_count();
    if (w <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> threads;
    for (std::size_t lo = 0; lo < n; lo += chunk) {
        const std::size_t hi = std::min(n, lo + chunk);
        threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : threads) t.join();
}

} // namespace sflab
