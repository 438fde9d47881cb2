#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace dars {

/// Applies fn to every item on up to `concurrency` threads. Results keep the
/// input order; the first exception (by item index) is rethrown after all
/// workers finish.
template <typename In, typename Out, typename Fn>
std::vector<Out> parallel_map(const std::vector<In>& items, Fn fn, int concurrency) {
    std::vector<Out> results(items.size());
    if (items.empty()) return results;

    const int workers = std::max(1, std::min<int>(concurrency, static_cast<int>(items.size())));
    if (workers == 1) {
        for (size_t i = 0; i < items.size(); ++i) results[i] = fn(items[i]);
        return results;
    }

    std::vector<std::exception_ptr> errors(items.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                results[i] = fn(items[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace dars
