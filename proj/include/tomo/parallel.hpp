#pragma once

#include <cstdint>
#include <functional>

namespace tomo {

// Global worker-thread count used by parallel_for. 0 = hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n) on a static contiguous partition of the index
// range. Each index is processed by exactly one thread, so writes to
// per-index outputs need no synchronization and results do not depend on the
// thread count. Nested calls run serially on the calling thread.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Chunked variant: fn(begin, end) per contiguous block, one block per worker.
void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace tomo
