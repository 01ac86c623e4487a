#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace torusflow {

namespace detail {
inline int& thread_count() {
    static int count = 1;
    return count;
}
} // namespace detail

inline void set_num_threads(int n) { detail::thread_count() = std::max(1, n); }
inline int num_threads() { return detail::thread_count(); }

/// Static partition over [0, count) with the worker's chunk id passed along,
/// for per-chunk reductions that must stay deterministic. Chunk boundaries
/// depend only on count and the configured thread count.
template <class Fn>
void parallel_for_chunked(std::size_t count, Fn&& fn) {
    const int nt = std::min<std::size_t>(num_threads(), count == 0 ? 1 : count);
    if (nt <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(0, i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nt);
    const std::size_t chunk = (count + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([t, lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(t, i);
        });
    }
    for (auto& w : workers) w.join();
}

/// Static partition over [0, count). Each index is computed independently of
/// every other, so results are bit-identical for any thread count.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const int nt = std::min<std::size_t>(num_threads(), count == 0 ? 1 : count);
    if (nt <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nt);
    const std::size_t chunk = (count + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace torusflow
