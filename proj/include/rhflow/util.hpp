#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace rhflow {

// Worker cap: RHFLOW_THREADS if set, else hardware concurrency.
inline int max_threads() {
    if (const char* env = std::getenv("RHFLOW_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Deterministic parallel loop: results must be written by index; the work
// partition never affects the output.
inline void parallel_for(int n, const std::function<void(int)>& body) {
    const int workers = std::min(max_threads(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += workers) body(i);
        });
    for (auto& th : pool) th.join();
}

// splitmix64: stable per-index sub-seeds for reproducible randomized fixtures.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace rhflow
