#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace earid {

/// Runs fn(i) for i in [0, n). Work is chunked over at most `threads`
/// workers; each index is processed exactly once and results must be
/// written to per-index slots, so the output is identical for any thread
/// count. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (threads == 0) threads = hw ? hw : 1;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace earid
