#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "incompressa/matrix3.hpp"

namespace testsupport {

using incompressa::Matrix3;
using incompressa::Vec3;

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline Matrix3 random_rotation(std::mt19937_64& rng) {
    double q[4], n2;
    do {
        for (double& qi : q) qi = 2.0 * uniform01(rng) - 1.0;
        n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
    } while (n2 < 1e-8 || n2 > 1.0);
    const double n = std::sqrt(n2);
    for (double& qi : q) qi /= n;
    const double q0 = q[0], q1 = q[1], q2 = q[2], q3 = q[3];
    Matrix3 r;
    r(0, 0) = 1 - 2 * (q2 * q2 + q3 * q3);
    r(0, 1) = 2 * (q1 * q2 - q0 * q3);
    r(0, 2) = 2 * (q1 * q3 + q0 * q2);
    r(1, 0) = 2 * (q1 * q2 + q0 * q3);
    r(1, 1) = 1 - 2 * (q1 * q1 + q3 * q3);
    r(1, 2) = 2 * (q2 * q3 - q0 * q1);
    r(2, 0) = 2 * (q1 * q3 - q0 * q2);
    r(2, 1) = 2 * (q2 * q3 + q0 * q1);
    r(2, 2) = 1 - 2 * (q1 * q1 + q2 * q2);
    return r;
}

/// Random well-conditioned matrix with determinant in [det_lo, det_hi]:
/// random entries, rescaled to a random target determinant. Extreme
/// conditioning is rejected so energies stay O(1)-representable.
inline Matrix3 random_matrix_with_det(std::mt19937_64& rng, double det_lo, double det_hi) {
    for (;;) {
        Matrix3 m;
        for (double& a : m.a) a = uniform(rng, -1.0, 1.0);
        double d = m.det();
        if (std::abs(d) < 0.15 || std::abs(d) > 3.0) continue;
        if (d < 0.0) {
            for (int j = 0; j < 3; ++j) std::swap(m(0, j), m(1, j));
        }
        const double target = uniform(rng, det_lo, det_hi);
        const Matrix3 out = std::cbrt(target / m.det()) * m;
        double fro2 = 0.0;
        for (double a : out.a) fro2 += a * a;
        if (fro2 > 20.0) continue;
        return out;
    }
}

/// Random symmetric trace-free matrix with entries O(1).
inline Matrix3 random_tracefree_symmetric(std::mt19937_64& rng) {
    Matrix3 b;
    for (double& a : b.a) a = uniform(rng, -1.0, 1.0);
    b = b.sym();
    const double t = b.trace() / 3.0;
    for (int i = 0; i < 3; ++i) b(i, i) -= t;
    return b;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testsupport
