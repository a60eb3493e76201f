#ifndef DPEXPR_PARALLEL_HPP
#define DPEXPR_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dpexpr {

/**
 * Runs `fun(start, end)` over contiguous blocks of `[0, total)` on up to `num_threads` threads.
 * If any block throws, the exception from the lowest-numbered failing block is rethrown after all threads join,
 * so the reported error does not depend on the thread count.
 */
template<class Function_>
void parallelize(std::size_t total, int num_threads, Function_ fun) {
    std::size_t workers = std::max(1, num_threads);
    workers = std::min(workers, std::max<std::size_t>(total, 1));
    if (workers <= 1) {
        fun(std::size_t(0), total);
        return;
    }

    std::size_t per_worker = total / workers, remainder = total % workers;
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);

    std::size_t start = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t length = per_worker + (w < remainder);
        threads.emplace_back([&fun, &errors, w, start, length]() {
            try {
                fun(start, start + length);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
        start += length;
    }

    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}

#endif
