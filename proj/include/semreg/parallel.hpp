#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace semreg {

// Fixed-size worker pool. Work is partitioned by index range, every task
// writes only to slots it owns, and callers reduce results in a fixed order
// afterwards, so results are independent of the thread count.
class ThreadPool {
public:
    explicit ThreadPool(int threads = 0) {
        if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads < 1) threads = 1;
        thread_count_ = threads;
        for (int i = 0; i < threads - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int thread_count() const { return thread_count_; }

    // Runs fn(i) for i in [begin, end). Blocks until all indices are done.
    void parallel_for(std::int64_t begin, std::int64_t end,
                      const std::function<void(std::int64_t)>& fn) {
        const std::int64_t n = end - begin;
        if (n <= 0) return;
        if (thread_count_ == 1 || n == 1) {
            for (std::int64_t i = begin; i < end; ++i) fn(i);
            return;
        }
        const std::int64_t chunks = std::min<std::int64_t>(n, thread_count_ * 4);
        const std::int64_t chunk_size = (n + chunks - 1) / chunks;
        std::mutex done_mutex;
        std::condition_variable done_cv;
        std::int64_t remaining = chunks;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            for (std::int64_t c = 0; c < chunks; ++c) {
                const std::int64_t lo = begin + c * chunk_size;
                const std::int64_t hi = std::min(end, lo + chunk_size);
                tasks_.push([&fn, lo, hi, &done_mutex, &done_cv, &remaining] {
                    for (std::int64_t i = lo; i < hi; ++i) fn(i);
                    std::lock_guard<std::mutex> dl(done_mutex);
                    if (--remaining == 0) done_cv.notify_one();
                });
            }
        }
        cv_.notify_all();
        // The calling thread helps drain the queue instead of idling.
        while (true) {
            std::function<void()> task;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (tasks_.empty()) break;
                task = std::move(tasks_.front());
                tasks_.pop();
            }
            task();
        }
        std::unique_lock<std::mutex> dl(done_mutex);
        done_cv.wait(dl, [&remaining] { return remaining == 0; });
    }

private:
    void worker_loop() {
        while (true) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
                if (stop_ && tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop();
            }
            task();
        }
    }

    std::vector<std::thread> workers_;
    std::queue<std::function<void()>> tasks_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool stop_ = false;
    int thread_count_ = 1;
};

} // namespace semreg
