#pragma once

// Trial farm: runs independent trials on a bounded worker pool. Results are
// stored by trial index, so output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#include "crko/bits.hpp"

namespace crko {

/// Per-trial seed from (master, trial, arm).
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t arm = 0) noexcept {
  return derive_seed(master, Stream::trial, trial, arm);
}

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

template <class Fn>
auto parallel_map(std::uint64_t count, unsigned workers, Fn&& fn)
    -> std::vector<decltype(fn(std::uint64_t{}))> {
  using R = decltype(fn(std::uint64_t{}));
  static_assert(!std::is_same_v<R, bool>, "std::vector<bool> slots are not independently writable");
  std::vector<R> out(count);
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::uint64_t>(count, 1024))));
  if (workers <= 1) {
    for (std::uint64_t t = 0; t < count; ++t) out[t] = fn(t);
    return out;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::uint64_t t = next.fetch_add(1);
      if (t >= count) return;
      try {
        out[t] = fn(t);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace crko
