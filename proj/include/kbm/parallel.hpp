#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace kbm {

// Runs fn(0..n-1) across workers. Items must be independent; results must be
// written to per-item slots so the outcome does not depend on scheduling.
inline void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    const int workers = static_cast<int>(std::min<long>(threads, n));
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace kbm
