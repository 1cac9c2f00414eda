#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace featscale {

/// Worker-count default: --threads flag > FEATSCALE_THREADS env > hardware.
inline int default_thread_count() {
    if (const char* env = std::getenv("FEATSCALE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static-free parallel loop over [0, count). Work items must write to
/// disjoint slots; reductions happen after the join so results do not
/// depend on scheduling.
template <typename Fn>
void parallel_for(long count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = static_cast<int>(std::min<long>(threads, count));
    pool.reserve(static_cast<std::size_t>(n_workers) - 1);
    for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

}  // namespace featscale
