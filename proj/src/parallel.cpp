#include "wbs/parallel.hpp"

#include <omp.h>

namespace wbs {

namespace {
int g_default_threads = -1;
}

void set_thread_count(int threads) {
  if (g_default_threads < 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : g_default_threads);
}

int thread_count() { return omp_get_max_threads(); }

namespace detail {

void omp_for(std::int64_t n, void (*thunk)(void*, std::int64_t), void* ctx) {
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) thunk(ctx, i);
}

}  // namespace detail
}  // namespace wbs
