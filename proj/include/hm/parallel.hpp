#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hm {

/// Worker policy for data-parallel loops. workers <= 1 selects the serial
/// reference loop; anything above runs the OpenMP kernel with that many
/// threads. Results are bit-identical either way: every loop body owns its
/// slot and its own RNG substream, and reductions happen serially afterwards.
struct ExecPolicy {
    int workers = 1;

    static int hardware_workers() {
#ifdef _OPENMP
        return omp_get_max_threads();
#else
        return 1;
#endif
    }
};

template <class F>
void parallel_for(std::size_t n, const ExecPolicy& exec, F&& body) {
    if (exec.workers > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(exec.workers)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
#endif
    }
    for (std::size_t i = 0; i < n; ++i) body(i); // serial reference
}

} // namespace hm
