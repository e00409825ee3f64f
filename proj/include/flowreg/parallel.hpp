#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowreg::par {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Plain data-parallel loop. Each index must write only its own outputs.
template <class F>
void for_each(std::int64_t n, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) f(i);
}

// Fixed block size so that reductions are bit-identical regardless of the
// thread count or schedule: blocks are summed independently, then combined
// in block order.
inline constexpr std::int64_t kReductionBlock = 4096;

template <class F>
double block_sum(std::int64_t n, F&& f) {
    const std::int64_t nblocks = (n + kReductionBlock - 1) / kReductionBlock;
    if (nblocks <= 1) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += f(i);
        return s;
    }
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t b = 0; b < nblocks; ++b) {
        const std::int64_t lo = b * kReductionBlock;
        const std::int64_t hi = std::min(n, lo + kReductionBlock);
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += f(i);
        partial[static_cast<std::size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace flowreg::par
