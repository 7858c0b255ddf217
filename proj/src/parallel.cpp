// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace had {

namespace {

int initial_thread_count() {
    if (const char *env = std::getenv("HAD_SPLAT_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    return 1;
}

std::atomic<int> &count_slot() {
    static std::atomic<int> n{initial_thread_count()};
    return n;
}

} // namespace

int thread_count() { return count_slot().load(); }

void set_thread_count(int n) { count_slot().store(n > 0 ? n : 1); }

} // namespace had
