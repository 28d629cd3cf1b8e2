#pragma once

// Order-preserving parallel map: results land in index order, so output
// never depends on the thread count.

#include <cstddef>
#include <thread>
#include <vector>

namespace maskbench::par {

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (threads > n) threads = n;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

template <typename Out, typename Fn>
std::vector<Out> parallel_map(std::size_t n, std::size_t threads, Fn&& fn) {
    std::vector<Out> out(n);
    parallel_for(n, threads, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

}  // namespace maskbench::par
