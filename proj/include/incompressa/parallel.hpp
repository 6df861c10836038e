#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace incompressa {

/// Deterministic parallel sum. The index space is split into a fixed number
/// of chunks whose partial sums are combined in chunk order, so the result
/// is independent of the OpenMP thread count and identical across runs.
template <class F>
double chunked_sum(std::ptrdiff_t n, F&& term) {
    if (n <= 0) return 0.0;
    const std::ptrdiff_t nchunks = std::min<std::ptrdiff_t>(n, 512);
    std::vector<double> partial(static_cast<size_t>(nchunks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        const std::ptrdiff_t lo = n * c / nchunks;
        const std::ptrdiff_t hi = n * (c + 1) / nchunks;
        double s = 0.0;
        for (std::ptrdiff_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<size_t>(c)] = s;
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

/// Deterministic parallel max.
template <class F>
double chunked_max(std::ptrdiff_t n, F&& term) {
    if (n <= 0) return 0.0;
    const std::ptrdiff_t nchunks = std::min<std::ptrdiff_t>(n, 512);
    std::vector<double> partial(static_cast<size_t>(nchunks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        const std::ptrdiff_t lo = n * c / nchunks;
        const std::ptrdiff_t hi = n * (c + 1) / nchunks;
        double m = 0.0;
        for (std::ptrdiff_t i = lo; i < hi; ++i) m = std::max(m, term(i));
        partial[static_cast<size_t>(c)] = m;
    }
    double total = 0.0;
    for (double m : partial) total = std::max(total, m);
    return total;
}

}  // namespace incompressa
