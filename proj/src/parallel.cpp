#include "fracmap/parallel.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fracmap::par {

namespace {
int g_cap = 0;
}

void set_thread_cap(int threads) { g_cap = std::max(0, threads); }

int max_threads() {
  static const int env_cap = [] {
    if (const char* env = std::getenv("FRACMAP_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return 0;
  }();
  int n = 1;
#ifdef _OPENMP
  n = omp_get_max_threads();
#endif
  if (env_cap > 0) n = std::min(n, env_cap);
  if (g_cap > 0) n = std::min(n, g_cap);
  return std::max(1, n);
}

Exec default_mode() {
#ifdef _OPENMP
  return max_threads() > 1 ? Exec::Parallel : Exec::Serial;
#else
  return Exec::Serial;
#endif
}

}  // namespace fracmap::par
