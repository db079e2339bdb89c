#include "aoff/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace aoff {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int num_threads() { return g_threads.load(); }

void parallel_chunks(size_t begin, size_t end,
                     const std::function<void(size_t, size_t, int)>& fn) {
    if (end <= begin) return;
    const size_t total = end - begin;
    int workers = num_threads();
    if (static_cast<size_t>(workers) > total) workers = static_cast<int>(total);
    if (workers <= 1) {
        fn(begin, end, 0);
        return;
    }
    const size_t base = total / workers;
    const size_t extra = total % workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    size_t lo = begin;
    for (int w = 0; w < workers; ++w) {
        const size_t len = base + (static_cast<size_t>(w) < extra ? 1 : 0);
        const size_t hi = lo + len;
        if (w == workers - 1) {
            fn(lo, hi, w);
        } else {
            pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, w); });
        }
        lo = hi;
    }
    for (auto& t : pool) t.join();
}

void parallel_for(size_t begin, size_t end, const std::function<void(size_t)>& fn) {
    parallel_chunks(begin, end, [&fn](size_t lo, size_t hi, int) {
        for (size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace aoff
