#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace propsynth {

// Batch drivers (oracle sweeps, covering samples, candidate scoring) run either
// serially or via OpenMP. Results must be identical under both policies; the
// serial path is the reference the tests compare against.
enum class ExecPolicy { Serial, Parallel };

// Uneven per-item work (forward passes, whole synthesis tasks).
template <class F>
void parallel_for(ExecPolicy policy, std::int64_t n, F&& body) {
#ifdef _OPENMP
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#else
  (void)policy;
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

// Uniform tiny tasks (per-candidate scoring); static partitioning keeps the
// scheduling overhead off the critical path.
template <class F>
void parallel_for_static(ExecPolicy policy, std::int64_t n, F&& body) {
#ifdef _OPENMP
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#else
  (void)policy;
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace propsynth
