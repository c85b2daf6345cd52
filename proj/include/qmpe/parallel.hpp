#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qmpe {

// out[i] = f(i) for i < n on up to `width` threads. Each slot is written by
// exactly one thread, so the result never depends on the width. The first
// exception by index is rethrown.
template <class F>
auto parallel_map(std::size_t n, std::size_t width, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t start, std::size_t stride) {
    for (std::size_t i = start; i < n; i += stride) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (width <= 1 || n <= 1) {
    work(0, 1);
  } else {
    const std::size_t w = width < n ? width : n;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) pool.emplace_back(work, k, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace qmpe
