#include "incompressa/matrix3.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace incompressa {

Matrix3 Matrix3::inverse() const {
    const double d = det();
    if (d == 0.0) throw std::domain_error("Matrix3::inverse: singular matrix");
    Matrix3 r;
    r(0, 0) = (a[4] * a[8] - a[5] * a[7]) / d;
    r(0, 1) = (a[2] * a[7] - a[1] * a[8]) / d;
    r(0, 2) = (a[1] * a[5] - a[2] * a[4]) / d;
    r(1, 0) = (a[5] * a[6] - a[3] * a[8]) / d;
    r(1, 1) = (a[0] * a[8] - a[2] * a[6]) / d;
    r(1, 2) = (a[2] * a[3] - a[0] * a[5]) / d;
    r(2, 0) = (a[3] * a[7] - a[4] * a[6]) / d;
    r(2, 1) = (a[1] * a[6] - a[0] * a[7]) / d;
    r(2, 2) = (a[0] * a[4] - a[1] * a[3]) / d;
    return r;
}

bool Matrix3::is_rotation(double tol) const {
    const Matrix3 g = transpose() * (*this) - Matrix3::identity();
    for (double v : g.a)
        if (std::abs(v) > tol) return false;
    return std::abs(det() - 1.0) <= tol;
}

Matrix3 rotation_about_axis(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0) throw std::domain_error("rotation_about_axis: zero axis");
    const Vec3 u = axis * (1.0 / n);
    const double c = std::cos(angle), s = std::sin(angle);
    Matrix3 k;  // cross-product matrix of u
    k(0, 1) = -u.z; k(0, 2) = u.y;
    k(1, 0) = u.z;  k(1, 2) = -u.x;
    k(2, 0) = -u.y; k(2, 1) = u.x;
    return Matrix3::identity() + s * k + (1.0 - c) * (k * k);
}

std::vector<double> symmetric_eigenvalues(const double* m, int n) {
    std::vector<double> a(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[i * n + j] = 0.5 * (m[i * n + j] + m[j * n + i]);

    auto off = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += a[i * n + j] * a[i * n + j];
        return s;
    };

    for (int sweep = 0; sweep < 64 && off() > 1e-300; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p], aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0)
                               / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a[i * n + i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

SymEig3 eigen_sym3(const Matrix3& m) {
    // Jacobi with accumulated rotations; 3x3 converges in a handful of sweeps.
    Matrix3 a = m.sym();
    Matrix3 v = Matrix3::identity();
    for (int sweep = 0; sweep < 64; ++sweep) {
        double offd = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) offd += a(i, j) * a(i, j);
        if (offd <= 1e-300) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0)
                               / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    SymEig3 e;
    std::array<int, 3> order{0, 1, 2};
    std::array<double, 3> d{a(0, 0), a(1, 1), a(2, 2)};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return d[i] < d[j]; });
    for (int c = 0; c < 3; ++c) {
        e.values[c] = d[order[c]];
        for (int r = 0; r < 3; ++r) e.vectors(r, c) = v(r, order[c]);
    }
    return e;
}

std::array<double, 3> singular_values(const Matrix3& f) {
    const SymEig3 e = eigen_sym3(f.transpose() * f);
    std::array<double, 3> s;
    for (int i = 0; i < 3; ++i) s[i] = std::sqrt(std::max(0.0, e.values[i]));
    return s;
}

namespace {

// Deterministic xorshift for the det<=0 fallback sampler; a fixed stream
// keeps distance_to_rotations a pure function.
struct SplitMix64 {
    uint64_t s;
    uint64_t next() {
        uint64_t z = (s += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
};

Matrix3 sample_rotation(SplitMix64& rng) {
    // Uniform via random unit quaternion.
    double q0, q1, q2, q3, n2;
    do {
        q0 = 2.0 * rng.uniform() - 1.0;
        q1 = 2.0 * rng.uniform() - 1.0;
        q2 = 2.0 * rng.uniform() - 1.0;
        q3 = 2.0 * rng.uniform() - 1.0;
        n2 = q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3;
    } while (n2 < 1e-8 || n2 > 1.0);
    const double n = std::sqrt(n2);
    q0 /= n; q1 /= n; q2 /= n; q3 /= n;
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

}  // namespace

double distance_to_rotations(const Matrix3& f) {
    if (f.det() > 0.0) {
        const auto s = singular_values(f);
        double d2 = 0.0;
        for (double si : s) d2 += (si - 1.0) * (si - 1.0);
        return std::sqrt(d2);
    }
    // det <= 0: minimize |F - R| over sampled rotations, then refine the
    // best candidate by coordinate descent in axis-angle increments.
    SplitMix64 rng{0x1CEB00DA2024ull};
    Matrix3 best = Matrix3::identity();
    double best_d = (f - best).norm();
    for (int i = 0; i < 4096; ++i) {
        const Matrix3 r = sample_rotation(rng);
        const double d = (f - r).norm();
        if (d < best_d) { best_d = d; best = r; }
    }
    const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double step = 0.2;
    while (step > 1e-10) {
        bool improved = false;
        for (const Vec3& ax : axes) {
            for (double sgn : {1.0, -1.0}) {
                const Matrix3 cand = rotation_about_axis(ax, sgn * step) * best;
                const double d = (f - cand).norm();
                if (d < best_d) { best_d = d; best = cand; improved = true; }
            }
        }
        if (!improved) step *= 0.5;
    }
    return best_d;
}

}  // namespace incompressa
