#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace fracmap {

/// Execution mode for the heavy kernels. Every parallel kernel has a serial
/// twin that walks the same chunk decomposition, so the two modes produce
/// bitwise-identical results and can be benchmarked against each other.
enum class Exec { Serial, Parallel };

namespace par {

/// Number of threads the parallel mode may use. Honors FRACMAP_THREADS.
int max_threads();

/// Force a thread cap programmatically (0 = back to env/default).
void set_thread_cap(int threads);

/// Default execution mode (Parallel when OpenMP is available and more than
/// one thread is allowed).
Exec default_mode();

inline constexpr std::int64_t kChunk = 1024;

/// Chunked parallel loop over [0, n). The body receives [begin, end) ranges.
template <class Body>
void for_chunks(std::int64_t n, Exec mode, Body&& body) {
  if (n <= 0) return;
  const std::int64_t nchunks = (n + kChunk - 1) / kChunk;
  if (mode == Exec::Serial) {
    for (std::int64_t c = 0; c < nchunks; ++c)
      body(c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  const int nt = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (std::int64_t c = 0; c < nchunks; ++c)
    body(c * kChunk, std::min(n, (c + 1) * kChunk));
}

/// Deterministic sum-reduction: each chunk is accumulated serially and the
/// chunk partials are combined in chunk order, so the result does not depend
/// on the thread count or on the execution mode.
template <class Term>
double reduce_sum(std::int64_t n, Exec mode, Term&& term) {
  if (n <= 0) return 0.0;
  const std::int64_t nchunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
  if (mode == Exec::Serial) {
    for (std::int64_t c = 0; c < nchunks; ++c) {
      double acc = 0.0;
      const std::int64_t end = std::min(n, (c + 1) * kChunk);
      for (std::int64_t i = c * kChunk; i < end; ++i) acc += term(i);
      partial[static_cast<std::size_t>(c)] = acc;
    }
  } else {
    const int nt = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (std::int64_t c = 0; c < nchunks; ++c) {
      double acc = 0.0;
      const std::int64_t end = std::min(n, (c + 1) * kChunk);
      for (std::int64_t i = c * kChunk; i < end; ++i) acc += term(i);
      partial[static_cast<std::size_t>(c)] = acc;
    }
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Parallel element-wise loop (no reduction, body touches disjoint slots).
template <class Body>
void for_each(std::int64_t n, Exec mode, Body&& body) {
  for_chunks(n, mode, [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) body(i);
  });
}

}  // namespace par
}  // namespace fracmap
