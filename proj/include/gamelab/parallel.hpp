#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gamelab {

// Resolves a requested worker count: explicit value > 0 wins, then the
// GAME_LAB_THREADS environment variable, then hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GAME_LAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Splits [0, n_items) into fixed blocks and runs fn(block_index, begin, end)
// across workers. Blocks are claimed dynamically but indexed statically, so
// callers that write results into per-block (or per-item) slots and reduce in
// block order get bitwise identical results for any worker count.
inline void parallel_blocks(long n_items, long block_size, int threads,
                            const std::function<void(long, long, long)>& fn) {
    if (n_items <= 0) return;
    if (block_size <= 0) block_size = 1;
    const long n_blocks = (n_items + block_size - 1) / block_size;
    threads = resolve_threads(threads);
    if (threads > n_blocks) threads = static_cast<int>(n_blocks);

    if (threads <= 1) {
        for (long b = 0; b < n_blocks; ++b) {
            const long begin = b * block_size;
            const long end = std::min(n_items, begin + block_size);
            fn(b, begin, end);
        }
        return;
    }

    std::atomic<long> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const long b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const long begin = b * block_size;
            const long end = std::min(n_items, begin + block_size);
            try {
                fn(b, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n_blocks);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gamelab
