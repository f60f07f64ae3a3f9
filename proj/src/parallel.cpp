#include "tomo/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace tomo {

namespace {
std::atomic<int> g_threads{0};
thread_local bool t_in_worker = false;
}  // namespace

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() {
    int n = g_threads.load();
    if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int nt = t_in_worker ? 1 : std::min<int64_t>(thread_count(), n);
    if (nt == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    const int64_t chunk = (n + nt - 1) / nt;
    for (int t = 1; t < nt; ++t) {
        const int64_t b = t * chunk, e = std::min<int64_t>(n, (t + 1) * chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] {
            t_in_worker = true;
            fn(b, e);
            t_in_worker = false;
        });
    }
    t_in_worker = true;
    fn(0, std::min<int64_t>(n, chunk));
    t_in_worker = false;
    for (auto& th : pool) th.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_for_chunks(n, [&fn](int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace tomo
