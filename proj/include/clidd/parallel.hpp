#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace clidd::parallel {

/// Process-wide worker count used by the parallel loops below (default 1).
void set_workers(int count);
int workers();

/// Temporarily overrides the worker count.
class ScopedWorkers {
 public:
  explicit ScopedWorkers(int count) : previous_(workers()) { set_workers(count); }
  ~ScopedWorkers() { set_workers(previous_); }
  ScopedWorkers(const ScopedWorkers&) = delete;
  ScopedWorkers& operator=(const ScopedWorkers&) = delete;

 private:
  int previous_;
};

/// Calls `fn(i)` for every i in [0, count). Indices are dealt round-robin to a fixed set of
/// workers; callers must make each index write disjoint output so results never depend on
/// the worker count.
template <typename Fn>
void for_each_index(std::int64_t count, Fn&& fn) {
  const std::int64_t pool_size = std::min<std::int64_t>(workers(), count);
  if (pool_size <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(pool_size));
    for (std::int64_t t = 0; t < pool_size; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::int64_t i = t; i < count; i += pool_size) fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace clidd::parallel
