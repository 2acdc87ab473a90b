#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cbir {

/// Worker count from CBIR_WORKERS, else the hardware concurrency (at least 1).
std::size_t default_workers();

/// Runs body(task) for task in [0, tasks) on up to `workers` threads. Tasks are
/// claimed dynamically, so bodies must write only to task-owned slots. If any
/// task throws, the exception of the lowest failing task index is rethrown
/// after all threads join.
template <class Body>
void parallel_for(std::size_t tasks, std::size_t workers, Body&& body) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(tasks, 1));
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks; ++t) body(t);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_task = tasks;

    auto run = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
            if (t >= tasks) return;
            try {
                body(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (t < error_task) {
                    error_task = t;
                    error = std::current_exception();
                }
            }
        }
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run);
        run();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace cbir
