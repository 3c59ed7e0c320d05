#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace earcanal {

// Global worker cap, settable once from the CLI (--threads). 0 = hardware.
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap{0};
    return cap;
}

inline unsigned worker_count() {
    unsigned cap = thread_cap().load();
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return cap == 0 ? hw : std::min(cap, hw);
}

// Runs fn(begin, end) over disjoint blocks covering [0, n). Blocks have a
// fixed width so any per-block bookkeeping is independent of worker count.
template <typename Fn>
void parallel_for_blocks(std::size_t n, Fn&& fn, std::size_t block = 1024) {
    if (n == 0) return;
    unsigned workers = worker_count();
    if (workers <= 1 || n <= block) {
        fn(std::size_t{0}, n);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&]() {
        for (;;) {
            std::size_t begin = next.fetch_add(block);
            if (begin >= n) return;
            fn(begin, std::min(begin + block, n));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 0; t + 1 < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t block = 1024) {
    parallel_for_blocks(
        n,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        },
        block);
}

// Deterministic parallel sum: contributions are accumulated per fixed-width
// block and the block partials added in index order, so the result does not
// depend on the worker count.
template <typename Fn>
double parallel_sum(std::size_t n, Fn&& fn) {
    const std::size_t block = 1024;
    std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for_blocks(
        nblocks,
        [&](std::size_t bb, std::size_t be) {
            for (std::size_t b = bb; b < be; ++b) {
                double s = 0.0;
                std::size_t end = std::min((b + 1) * block, n);
                for (std::size_t i = b * block; i < end; ++i) s += fn(i);
                partial[b] = s;
            }
        },
        1);
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

} // namespace earcanal
