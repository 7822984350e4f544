#include "gusl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gusl {

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 4u));
}

void parallel_chunks(size_t n, size_t chunk_size, int jobs,
                     const std::function<void(size_t, size_t, size_t)>& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    jobs = resolve_jobs(jobs);

    if (jobs <= 1 || n_chunks <= 1) {
        for (size_t c = 0; c < n_chunks; ++c) {
            size_t lo = c * chunk_size;
            fn(c, lo, std::min(n, lo + chunk_size));
        }
        return;
    }

    std::atomic<size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            size_t c = cursor.fetch_add(1);
            if (c >= n_chunks) return;
            size_t lo = c * chunk_size;
            try {
                fn(c, lo, std::min(n, lo + chunk_size));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), n_chunks);
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    // Chunk size keeps scheduling overhead low for fine-grained loops.
    size_t chunk = std::max<size_t>(1, n / (static_cast<size_t>(resolve_jobs(jobs)) * 8));
    parallel_chunks(n, chunk, jobs, [&](size_t, size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace gusl
