#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace singext {

// Process-wide worker count used by the pair sums and grid sweeps.
void set_thread_count(int n);
int thread_count();

// Runs body(block_index, begin, end) over fixed blocks of [0, n). The block
// layout depends only on n and block, never on the thread count.
template <class Body>
void for_blocks(std::size_t n, std::size_t block, Body&& body) {
  if (n == 0) return;
  block = std::max<std::size_t>(block, 1);
  const std::size_t nblocks = (n + block - 1) / block;
  const int workers = std::min<int>(thread_count(), static_cast<int>(nblocks));
  auto run = [&](std::size_t b) { body(b, b * block, std::min(n, (b + 1) * block)); };
  if (workers <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) run(b);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t b = static_cast<std::size_t>(w); b < nblocks; b += static_cast<std::size_t>(workers)) run(b);
    });
  }
  for (auto& t : pool) t.join();
}

// Sums per-block partials in block order, so the result is identical for any
// thread count.
template <class T, class Body>
T block_sum(std::size_t n, std::size_t block, T zero, Body&& body) {
  block = std::max<std::size_t>(block, 1);
  std::vector<T> partial((n + block - 1) / block, zero);
  for_blocks(n, block, [&](std::size_t b, std::size_t lo, std::size_t hi) { partial[b] = body(lo, hi); });
  T total = zero;
  for (const T& p : partial) total += p;
  return total;
}

}  // namespace singext
