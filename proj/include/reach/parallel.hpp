#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace reach {

inline int default_jobs() {
  if (const char* env = std::getenv("REACH_AUDIT_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Static chunking over [0, n). Results must be written to index-addressed
// slots so the outcome does not depend on the worker count.
inline void parallel_for(long n, int jobs, const std::function<void(long)>& fn) {
  if (n <= 0) return;
  if (static_cast<long>(jobs) > n) jobs = static_cast<int>(n);
  if (jobs <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t]() {
      const long lo = n * t / jobs;
      const long hi = n * (t + 1) / jobs;
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace reach
