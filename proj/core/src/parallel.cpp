#include "cbesq/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cbesq {

WorkerPool::WorkerPool(unsigned threads) : threads_(std::max(1u, threads)) {}

const WorkerPool& WorkerPool::serial() {
    static const WorkerPool pool(1);
    return pool;
}

void WorkerPool::for_each(std::size_t n, const std::function<void(std::size_t)>& fn) const {
    if (threads_ == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n, std::memory_order_relaxed);
                return;
            }
        }
    };
    const auto count = static_cast<std::size_t>(threads_) < n ? threads_ : static_cast<unsigned>(n);
    {
        std::vector<std::jthread> workers;
        workers.reserve(count);
        for (unsigned t = 0; t < count; ++t) workers.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace cbesq
