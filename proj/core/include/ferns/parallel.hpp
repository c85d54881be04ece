#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ferns {

/// Runs fn(task) for every task in [0, count) on up to `threads` workers.
///
/// Tasks are assigned in contiguous blocks; callers that reduce results must
/// do so per task, never per worker, so the outcome is independent of the
/// worker count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < count; ++t) fn(t);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t t = begin; t < end; ++t) fn(t);
    });
  }
}

/// Batch items are grouped into fixed-size chunks for gradient reduction.
inline constexpr std::size_t kReductionChunk = 16;

inline std::size_t chunk_count(std::size_t batch) {
  return (batch + kReductionChunk - 1) / kReductionChunk;
}

}  // namespace ferns
