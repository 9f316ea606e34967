// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace exitlab {

unsigned worker_count()
{
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (char const* env = std::getenv("EXITLAB_THREADS"))
    {
        try
        {
            long const cap = std::stol(env);
            if (cap >= 1)
            {
                n = std::min<unsigned>(n, static_cast<unsigned>(cap));
            }
        }
        catch (std::exception const&)
        {
            // ignore malformed values
        }
    }
    return n;
}

void parallel_for(std::size_t n, std::function<void(std::size_t)> const& body)
{
    unsigned const workers
        = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            body(i);
        }
        return;
    }

    std::size_t const chunk = std::max<std::size_t>(1, n / (workers * 8));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;)
        {
            std::size_t const begin = next.fetch_add(chunk);
            if (begin >= n)
            {
                return;
            }
            std::size_t const end = std::min(n, begin + chunk);
            try
            {
                for (std::size_t i = begin; i < end; ++i)
                {
                    body(i);
                }
            }
            catch (...)
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                {
                    failure = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
    {
        threads.emplace_back(worker);
    }
    for (auto& t : threads)
    {
        t.join();
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

}  // namespace exitlab
