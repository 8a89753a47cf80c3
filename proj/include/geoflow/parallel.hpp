#pragma once
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace geoflow {

// Thread cap: GEOFLOW_THREADS env var, else hardware concurrency.
inline int max_threads() {
  if (const char* env = std::getenv("GEOFLOW_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? int(hc) : 1;
}

// Runs fn(i) for i in [0, n). Each index is computed exactly once by exactly
// one thread, so any per-index output is identical regardless of the thread
// count. fn must only write to index-i state.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  int threads = max_threads();
  if (threads <= 1 || n < 256) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    size_t lo = size_t(t) * chunk;
    size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace geoflow
