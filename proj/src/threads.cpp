#include "fexp/threads.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace fexp {

namespace {

thread_local bool inside_worker = false;

// Persistent pool. One job at a time; every participant snapshots the job
// under the mutex so late wakeups can only join the current job, never mix
// two. Nested parallel_for calls run serially (see inside_worker).
class Pool {
  public:
    explicit Pool(int extra_workers) {
        for (int i = 0; i < extra_workers; ++i)
            threads_.emplace_back([this] { worker_loop(); });
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::size_t n, std::size_t grain,
             const std::function<void(std::size_t, std::size_t)>& fn) {
        std::unique_lock<std::mutex> lock(mu_);
        job_fn_ = &fn;
        job_n_ = n;
        job_grain_ = grain;
        job_next_ = 0;
        job_left_ = (n + grain - 1) / grain;
        ++generation_;
        lock.unlock();
        cv_.notify_all();

        const bool was_inside = inside_worker;
        inside_worker = true;
        participate();
        inside_worker = was_inside;

        lock.lock();
        done_cv_.wait(lock, [this] { return job_left_ == 0; });
        job_fn_ = nullptr;
    }

  private:
    struct Snapshot {
        const std::function<void(std::size_t, std::size_t)>* fn;
        std::size_t n, grain, chunks;
    };

    void worker_loop() {
        inside_worker = true;
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            participate();
        }
    }

    // Pulls chunks of the current job until none remain. Chunk claim and
    // completion reporting both happen under the mutex; the chunk body runs
    // unlocked.
    void participate() {
        for (;;) {
            Snapshot snap{};
            std::size_t chunk = 0;
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (!job_fn_) return;
                const std::size_t chunks = (job_n_ + job_grain_ - 1) / job_grain_;
                if (job_next_ >= chunks) return;
                chunk = job_next_++;
                snap = Snapshot{job_fn_, job_n_, job_grain_, chunks};
            }
            const std::size_t begin = chunk * snap.grain;
            (*snap.fn)(begin, std::min(snap.n, begin + snap.grain));
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (--job_left_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
    std::size_t job_n_ = 0;
    std::size_t job_grain_ = 1;
    std::size_t job_next_ = 0;
    std::size_t job_left_ = 0;
    std::size_t generation_ = 0;
    bool stop_ = false;
};

Pool& pool() {
    static Pool p(worker_threads() - 1);
    return p;
}

}  // namespace

int worker_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("FEXP_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return cached;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (grain == 0) grain = 1;
    const std::size_t chunks = (n + grain - 1) / grain;
    // nested calls from a pool participant run serially; chunk boundaries
    // are fixed by (n, grain) alone, so results are identical either way
    if (worker_threads() <= 1 || chunks <= 1 || inside_worker) {
        fn(0, n);
        return;
    }
    pool().run(n, grain, fn);
}

}  // namespace fexp
