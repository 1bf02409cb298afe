#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace superglobal {

// Runs fn(begin, end, worker) over contiguous chunks of [0, n). Chunk
// boundaries depend only on n and the worker count. The first exception
// thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t begin = n * t / workers;
    const std::size_t end = n * (t + 1) / workers;
    pool.emplace_back([&, begin, end, t] {
      try {
        fn(begin, end, static_cast<unsigned>(t));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace superglobal
