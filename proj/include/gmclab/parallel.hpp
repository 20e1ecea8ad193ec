#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gmclab {

/// Worker count: explicit config value if positive, otherwise the
/// GMC_LAB_THREADS environment variable, otherwise the hardware default.
inline int resolve_thread_count(int configured = 0) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("GMC_LAB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs body(i) for i in [0, count).  Each index writes only to its own
/// output slots, so the result is independent of the thread count; any
/// reduction over the results must happen afterwards in index order.
template <class Body>
void parallel_for(std::int64_t count, const Body& body, int threads = 0) {
    const int n_threads = resolve_thread_count(threads);
    if (n_threads <= 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    const std::int64_t chunk = (count + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::int64_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace gmclab
