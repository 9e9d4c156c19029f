#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"

namespace bdsde {

// 0 means auto-detect from the hardware, capped to 8.
inline int resolve_worker_count(int requested) {
  if (requested < 0)
    throw ConfigError("worker count must be nonnegative, got " + std::to_string(requested));
  if (requested > 64) throw ConfigError("worker count above 64 is unsupported");
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// Runs task(i) for every i in [0, count).  Tasks must write only to their own
// preallocated slots; callers reduce in index order afterwards, which makes
// the result independent of the worker count.  Every index is attempted even
// if some fail, and the failure with the smallest index is rethrown, so error
// behavior is scheduler-independent too.
template <class Task>
void parallel_for_index(std::int64_t count, int workers, Task&& task) {
  if (count <= 0) return;
  const int pool =
      static_cast<int>(std::min<std::int64_t>(resolve_worker_count(workers), count));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(count));
  auto run_strided = [&](std::int64_t first) {
    for (std::int64_t i = first; i < count; i += pool) {
      try {
        task(i);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (pool <= 1) {
    run_strided(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(pool));
    for (int t = 0; t < pool; ++t) threads.emplace_back(run_strided, static_cast<std::int64_t>(t));
    for (auto& th : threads) th.join();
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
}

}  // namespace bdsde
