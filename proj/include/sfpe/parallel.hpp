#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sfpe {

/// Runs fn(begin, end) over a fixed partition of [0, n).
///
/// The partition is chosen independently of `threads` (fixed chunk count),
/// so any floating-point work done per chunk is identical no matter how
/// many workers execute it. Callers must only write to disjoint,
/// index-addressed outputs inside fn.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1) {
    fn(std::int64_t{0}, n);
    return;
  }
  constexpr std::int64_t kChunks = 64;
  const std::int64_t chunk = (n + kChunks - 1) / kChunks;
  std::vector<std::thread> workers;
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (;;) {
        std::int64_t c = next.fetch_add(1);
        std::int64_t begin = c * chunk;
        if (begin >= n) return;
        fn(begin, std::min(begin + chunk, n));
      }
    } catch (...) {
      std::scoped_lock lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  workers.reserve(static_cast<std::size_t>(threads) - 1);
  for (int i = 0; i < threads - 1; ++i) workers.emplace_back(worker);
  worker();
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sfpe
