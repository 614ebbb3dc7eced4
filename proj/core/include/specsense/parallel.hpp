#ifndef SPECSENSE_PARALLEL_HPP
#define SPECSENSE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace specsense {

/// Run f(i) for i in [0, count). Work items must be independent; each writes
/// only its own output slot, so results are identical to a serial loop.
template <typename F>
void parallel_for(std::size_t count, F&& f, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                f(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace specsense

#endif
