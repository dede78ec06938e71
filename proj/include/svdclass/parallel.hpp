#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace svdclass {

/// Number of workers to use when the caller passes 0.
inline unsigned default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// reduction order never depends on scheduling. The first exception thrown
/// by any task is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = default_workers();
    const auto threads = static_cast<std::size_t>(std::min<std::size_t>(workers, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace svdclass
