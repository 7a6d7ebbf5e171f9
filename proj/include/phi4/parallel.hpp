#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"

namespace phi4 {

/** Worker count from PHI4_THREADS, falling back to the hardware concurrency. */
inline unsigned thread_count()
{
    if (const char* text = std::getenv("PHI4_THREADS")) {
        char* end = nullptr;
        const long requested = std::strtol(text, &end, 10);
        if (end == text || *end != '\0' || requested < 1)
            throw config_error("PHI4_THREADS must be a positive integer, got '" + std::string(text) + "'");
        return static_cast<unsigned>(requested);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Runs body(i) for i in [0, count) on a static block partition. Each index must only write its own slot;
 * the first exception by index is rethrown after all workers finish.
 */
template <class Body>
void parallel_for(std::size_t count, Body&& body)
{
    const std::size_t workers = std::min<std::size_t>(thread_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::vector<std::exception_ptr> failures(count);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t worker = 0; worker < workers; ++worker) {
        const std::size_t begin = count * worker / workers;
        const std::size_t end = count * (worker + 1) / workers;
        threads.emplace_back([&, begin, end] {
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& thread : threads)
        thread.join();
    for (const auto& failure : failures)
        if (failure)
            std::rethrow_exception(failure);
}

} // namespace phi4
