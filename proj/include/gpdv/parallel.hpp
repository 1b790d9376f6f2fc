#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gpdv {

/// Runs fn(worker, begin, end) over contiguous slices of [0, count). With
/// one thread everything runs inline. The exception of the lowest-numbered
/// failing worker is rethrown after all workers join.
template <class Fn>
void parallel_slices(std::ptrdiff_t count, int threads, Fn&& fn) {
  const int workers =
      static_cast<int>(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(threads, count)));
  if (workers <= 1) {
    fn(0, std::ptrdiff_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::ptrdiff_t begin = count * w / workers;
    const std::ptrdiff_t end = count * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// fn(i) for every i in [0, count).
template <class Fn>
void parallel_for(std::ptrdiff_t count, int threads, Fn&& fn) {
  parallel_slices(count, threads, [&](int, std::ptrdiff_t begin, std::ptrdiff_t end) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace gpdv
