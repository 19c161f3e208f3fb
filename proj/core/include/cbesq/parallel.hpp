#pragma once

#include <cstddef>
#include <functional>

namespace cbesq {

/// Fan-out of independent jobs over a fixed number of worker threads.
///
/// Library routines take a pool by reference and never create threads of
/// their own. Job i must write only to slot i of its output, which keeps
/// results independent of the thread count.
class WorkerPool {
public:
    explicit WorkerPool(unsigned threads = 1);

    unsigned threads() const { return threads_; }

    /// Runs fn(0), ..., fn(n - 1); rethrows the first exception raised by a job.
    void for_each(std::size_t n, const std::function<void(std::size_t)>& fn) const;

    /// Shared single-threaded pool.
    static const WorkerPool& serial();

private:
    unsigned threads_;
};

}  // namespace cbesq
