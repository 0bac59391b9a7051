#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace advisor {

// Worker count: ADVISOR_EKF_THREADS if set and positive, else hardware concurrency.
[[nodiscard]] unsigned batch_threads();

// Runs fn(0..n-1) on up to batch_threads() workers. Rethrows the first failure.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

template <typename T, typename F>
[[nodiscard]] std::vector<T> parallel_map(std::size_t n, F&& fn) {
    std::vector<T> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

}  // namespace advisor
