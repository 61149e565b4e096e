#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dak {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> n{0};  // 0 = not set, use default
    return n;
}
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Number of worker threads used by library loops. Defaults to the DAK_THREADS
/// environment variable, else hardware concurrency.
inline unsigned thread_count() {
    unsigned n = detail::thread_setting().load();
    if (n != 0) return n;
    if (const char* env = std::getenv("DAK_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_thread_count(unsigned n) { detail::thread_setting().store(n); }

/// Calls fn(i) for every i in [0, n). Work is split into contiguous blocks;
/// each index is processed exactly once, so any per-index output is
/// independent of the thread count. Nested calls run serially.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned threads = static_cast<unsigned>(
        std::min<std::size_t>(thread_count(), n));
    if (threads <= 1 || detail::in_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t block = std::max<std::size_t>(1, n / (threads * 8));
    auto worker = [&] {
        detail::in_parallel_region = true;
        for (;;) {
            const std::size_t begin = next.fetch_add(block);
            if (begin >= n) break;
            const std::size_t end = std::min(n, begin + block);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
        detail::in_parallel_region = false;
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace dak
