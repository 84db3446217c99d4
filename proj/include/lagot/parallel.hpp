#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace lagot {

// Worker cap: LAGOT_THREADS when set, otherwise hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("LAGOT_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Items must be independent; each worker owns a
// disjoint contiguous range so results land in caller-preallocated slots in
// index order regardless of scheduling.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = n;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int lo = w * chunk;
    int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lagot
