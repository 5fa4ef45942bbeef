#pragma once

#include <cstddef>
#include <cstdint>

namespace wbs {

// Every data-parallel kernel in the library has a serial reference path and
// an OpenMP path. Both call the same per-item function, so results are
// bit-identical; tests compare them directly.
enum class Backend { Serial, Parallel };

// 0 restores the OpenMP default.
void set_thread_count(int threads);
int thread_count();

namespace detail {
void omp_for(std::int64_t n, void (*thunk)(void*, std::int64_t), void* ctx);
}

template <typename Fn>
void parallel_for(Backend backend, std::int64_t n, Fn&& fn) {
  if (backend == Backend::Serial || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  auto thunk = [](void* ctx, std::int64_t i) { (*static_cast<Fn*>(ctx))(i); };
  detail::omp_for(n, thunk, &fn);
}

}  // namespace wbs
