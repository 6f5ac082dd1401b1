#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace transnet {

/// Worker parallelism cap: min(hardware threads, TNET_THREADS if set).
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("TNET_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

/// Runs f(i) for i in [0, n) across workers. Work items must be independent;
/// callers own any reduction and must perform it in a fixed order afterwards
/// so results do not depend on the thread count.
template <typename F>
void parallel_for(int n, F&& f) {
    const int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    auto run = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            f(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int t = 0; t < workers - 1; ++t) pool.emplace_back(run);
    run();
    for (std::thread& th : pool) th.join();
}

}  // namespace transnet
