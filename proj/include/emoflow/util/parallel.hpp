#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace emoflow::util {

/// Runs fn(0) .. fn(count-1) with at most max_in_flight invocations running
/// concurrently. All invocations complete before returning. fn must not
/// throw; callers that need per-item failures capture them into their own
/// result slots (each index writes only to its own slot, so no locking).
template <class Fn>
void parallel_for(std::size_t count, std::size_t max_in_flight, Fn&& fn) {
  if (count == 0) return;
  std::size_t workers = max_in_flight == 0 ? 1 : max_in_flight;
  if (workers > count) workers = count;

  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace emoflow::util
