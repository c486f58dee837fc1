#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace covsim::detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers in contiguous chunks.
// fn must only write state owned by index i.
template <typename Fn>
void parallel_for(std::size_t const n, int const threads, Fn&& fn) {
  auto const workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2 * workers) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    auto const chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          auto const end = std::min(n, (w + 1) * chunk);
          for (std::size_t i = w * chunk; i < end; ++i) {
            fn(i);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto const& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace covsim::detail
