#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "qrag/common.hpp"

namespace qrag {

// Runs fn(0..count-1) across up to `threads` workers. Indices are dealt in
// contiguous blocks and every index runs exactly once, so any fn that only
// writes to per-index slots gives the same result at any thread count.
// The first exception thrown by a worker is rethrown on the caller.
template <typename F>
void parallel_for(size_t count, int32_t threads, F&& fn) {
    if (threads < 1) throw InvalidArgument("parallel_for: threads must be >= 1");
    if (count == 0) return;
    const size_t workers =
        std::min<size_t>(static_cast<size_t>(threads), count);
    if (workers == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const size_t block = (count + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        const size_t begin = w * block;
        const size_t end = std::min(count, begin + block);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace qrag
