#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace octnet {

// Worker cap: OCTNET_THREADS env var if set, else hardware concurrency.
inline int max_threads() {
  static const int cached = [] {
    if (const char* env = std::getenv("OCTNET_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return cached;
}

// Runs fn(begin, end) over a partition of [0, n). Each index is processed by
// exactly one worker and the partition depends only on n, so any state owned
// per-index is written once; results are independent of the worker count.
inline void parallel_for_range(int64_t n,
                               const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int threads = std::min<int64_t>(max_threads(), n);
  if (threads <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads - 1);
  int64_t chunk = (n + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    int64_t lo = t * chunk;
    int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(0, std::min<int64_t>(n, chunk));
  for (auto& w : workers) w.join();
}

inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  parallel_for_range(n, [&fn](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace octnet
