#include "voxshape/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace voxshape {

namespace {

thread_local bool t_inside_pool = false;

// Small persistent pool so fine-grained parallel regions avoid per-call
// thread spawns. Workers block on a generation counter.
class WorkerPool {
public:
    static WorkerPool& instance() {
        static WorkerPool pool;
        return pool;
    }

    void run(int n, int threads, const std::function<void(int)>& fn) {
        const int want = std::min(threads - 1, n - 1);
        ensure_workers(want);

        std::unique_lock<std::mutex> lock(mutex_);
        job_fn_ = &fn;
        job_n_ = n;
        next_.store(0, std::memory_order_relaxed);
        active_ = std::min(want, int(workers_.size()));
        pending_ = active_;
        ++generation_;
        lock.unlock();
        cv_.notify_all();

        work_off(fn, n);

        std::unique_lock<std::mutex> wait_lock(mutex_);
        done_cv_.wait(wait_lock, [&] { return pending_ == 0; });
        job_fn_ = nullptr;
    }

private:
    WorkerPool() = default;

    ~WorkerPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void ensure_workers(int want) {
        std::lock_guard<std::mutex> lock(mutex_);
        while (int(workers_.size()) < want) {
            workers_.emplace_back([this, idx = int(workers_.size())] { worker_loop(idx); });
        }
    }

    void worker_loop(int idx) {
        t_inside_pool = true;
        std::uint64_t seen = 0;
        while (true) {
            const std::function<void(int)>* fn = nullptr;
            int n = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                if (idx >= active_) continue;
                fn = job_fn_;
                n = job_n_;
            }
            if (fn) work_off(*fn, n);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    void work_off(const std::function<void(int)>& fn, int n) {
        for (int i = next_.fetch_add(1, std::memory_order_relaxed); i < n;
             i = next_.fetch_add(1, std::memory_order_relaxed)) {
            fn(i);
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> workers_;
    const std::function<void(int)>* job_fn_ = nullptr;
    int job_n_ = 0;
    int active_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    std::atomic<int> next_{0};
    bool stop_ = false;
};

}  // namespace

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1 || t_inside_pool) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    WorkerPool::instance().run(n, threads, fn);
}

}  // namespace voxshape
