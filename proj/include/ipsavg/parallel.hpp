#pragma once

#include <cstddef>
#include <omp.h>

namespace ips {

/// Execution policy for the data-parallel kernels. Every kernel that accepts
/// an Exec has a serial reference path; the two paths must produce identical
/// results (reductions are carried out in a fixed serial order either way).
enum class Exec { serial, parallel };

inline int max_threads() { return omp_get_max_threads(); }

inline void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

/// Runs f(i) for i in [0, n). Under Exec::parallel the iterations run on the
/// OpenMP thread pool; f must only write to per-index slots.
template <typename F>
void parallel_for(std::size_t n, Exec exec, F&& f) {
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        f(static_cast<std::size_t>(i));
    }
}

}  // namespace ips
