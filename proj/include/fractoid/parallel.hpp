#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fractoid {

/// Worker cap: FRACTOID_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Fixed chunk size used for reductions. Chunk boundaries never depend on the
/// worker count, so merging per-chunk partials in chunk order gives the same
/// floating-point result for any number of workers.
inline constexpr std::size_t kReductionChunk = 512;

/// Runs body(chunk_index, begin, end) over [0, n) split into chunks of
/// `chunk` items. Workers pull chunks dynamically; the first exception thrown
/// by any chunk is rethrown on the calling thread after all workers stop.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const std::size_t workers = std::min(worker_count(), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        body(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Parallel reduction into per-chunk partial results merged in chunk order.
/// `make` creates an empty partial, `body(partial, begin, end)` fills it and
/// `merge(into, from)` combines two partials.
template <class Partial, class Make, class Body, class Merge>
Partial parallel_reduce(std::size_t n, Make&& make, Body&& body, Merge&& merge,
                        std::size_t chunk = kReductionChunk) {
  const std::size_t chunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<Partial> partials;
  partials.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) partials.push_back(make());
  parallel_chunks(n, chunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    body(partials[c], begin, end);
  });
  Partial total = make();
  for (auto& p : partials) merge(total, p);
  return total;
}

}  // namespace fractoid
