#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace samelda {

// Runs fn(begin, end) over [0, n) split into at most n_threads contiguous
// chunks. When prefix_weights (size n+1, nondecreasing) is given, chunk
// boundaries balance total weight instead of item count. The partition is a
// pure function of (n, weights, n_threads); parallel callers must make their
// outputs independent of the partition (this codebase does so by accumulating
// integers, which add associatively).
inline void parallel_ranges(std::int64_t n, int n_threads,
                            std::span<const std::int64_t> prefix_weights,
                            const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) {
    return;
  }
  const int workers = static_cast<int>(
      std::min<std::int64_t>(n, n_threads < 1 ? 1 : n_threads));
  std::vector<std::int64_t> bounds(static_cast<std::size_t>(workers) + 1, 0);
  bounds[static_cast<std::size_t>(workers)] = n;
  if (prefix_weights.empty()) {
    for (int i = 1; i < workers; ++i) {
      bounds[static_cast<std::size_t>(i)] = n * i / workers;
    }
  } else {
    const std::int64_t total = prefix_weights[static_cast<std::size_t>(n)];
    std::int64_t pos = 0;
    for (int i = 1; i < workers; ++i) {
      const std::int64_t target = total * i / workers;
      while (pos < n && prefix_weights[static_cast<std::size_t>(pos)] < target) {
        ++pos;
      }
      bounds[static_cast<std::size_t>(i)] = pos;
    }
  }
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int i = 0; i < workers; ++i) {
    threads.emplace_back([&, i] {
      try {
        fn(bounds[static_cast<std::size_t>(i)], bounds[static_cast<std::size_t>(i) + 1]);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

inline void parallel_ranges(std::int64_t n, int n_threads,
                            const std::function<void(std::int64_t, std::int64_t)>& fn) {
  parallel_ranges(n, n_threads, {}, fn);
}

}  // namespace samelda
