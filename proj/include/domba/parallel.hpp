#pragma once

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace domba {

enum class Execution { serial, parallel };

#ifdef _OPENMP
inline int max_threads() { return omp_get_max_threads(); }
#else
inline int max_threads() { return 1; }
#endif

// Data-parallel loop over [0, n). Bodies must write only to their own index
// slot; results are then combined by the caller in index order, so the
// outcome is identical for any thread count. Execution::serial is the
// reference path used by tests and the benchmark.
template <typename Body>
void parallel_for(std::size_t n, Body&& body,
                  Execution mode = Execution::parallel) {
#ifdef _OPENMP
  if (mode == Execution::parallel && n > 1) {
    #pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) {
    body(i);
  }
}

// Chunked variant for bodies that want per-worker scratch buffers:
// body(begin, end) handles one contiguous range.
template <typename Body>
void parallel_chunks(std::size_t n, Body&& body,
                     Execution mode = Execution::parallel) {
#ifdef _OPENMP
  if (mode == Execution::parallel && n > 1) {
    const std::size_t workers =
        static_cast<std::size_t>(omp_get_max_threads());
    const std::size_t chunks = workers * 4;
    const std::size_t step = (n + chunks - 1) / chunks;
    #pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * step;
      if (begin >= n) continue;
      const std::size_t end = begin + step < n ? begin + step : n;
      body(begin, end);
    }
    return;
  }
#else
  (void)mode;
#endif
  if (n > 0) body(std::size_t{0}, n);
}

}  // namespace domba
