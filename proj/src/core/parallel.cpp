#include "strata/core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace strata::parallel {

namespace {

std::atomic<int> g_max_threads{0};

int default_threads()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace

void set_max_threads(int n) { g_max_threads.store(n <= 0 ? 0 : n); }

int max_threads() noexcept
{
    const int n = g_max_threads.load();
    return n > 0 ? n : default_threads();
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn)
{
    if (count == 0)
        return;
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(max_threads()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr err;

    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(run);
    run();
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace strata::parallel
