// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace had {

/// Worker count used by the parallel loops. Defaults to HAD_SPLAT_THREADS if
/// set, otherwise 1.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Work items are assigned to workers by a fixed
/// stride, and callers write results into per-item slots, so outputs never
/// depend on the worker count.
template <typename Fn>
void parallel_for(int n, Fn &&fn) {
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace had
