#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace incompressa {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Dense 3x3 matrix, row-major. Holds deformation gradients, rotations,
/// strain-like quantities.
struct Matrix3 {
    std::array<double, 9> a{};

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }

    static Matrix3 zero() { return {}; }
    static Matrix3 identity() {
        Matrix3 m;
        m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
        return m;
    }
    static Matrix3 diagonal(double d0, double d1, double d2) {
        Matrix3 m;
        m(0, 0) = d0; m(1, 1) = d1; m(2, 2) = d2;
        return m;
    }
    static Matrix3 outer(const Vec3& u, const Vec3& v) {
        Matrix3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
        return m;
    }

    Matrix3 operator+(const Matrix3& o) const {
        Matrix3 r;
        for (int i = 0; i < 9; ++i) r.a[i] = a[i] + o.a[i];
        return r;
    }
    Matrix3 operator-(const Matrix3& o) const {
        Matrix3 r;
        for (int i = 0; i < 9; ++i) r.a[i] = a[i] - o.a[i];
        return r;
    }
    Matrix3 operator*(double s) const {
        Matrix3 r;
        for (int i = 0; i < 9; ++i) r.a[i] = a[i] * s;
        return r;
    }
    Matrix3& operator+=(const Matrix3& o) {
        for (int i = 0; i < 9; ++i) a[i] += o.a[i];
        return *this;
    }

    Matrix3 operator*(const Matrix3& o) const {
        Matrix3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Vec3 operator*(const Vec3& v) const {
        return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
                a[3] * v.x + a[4] * v.y + a[5] * v.z,
                a[6] * v.x + a[7] * v.y + a[8] * v.z};
    }

    Matrix3 transpose() const {
        Matrix3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double trace() const { return a[0] + a[4] + a[8]; }

    double det() const {
        return a[0] * (a[4] * a[8] - a[5] * a[7])
             - a[1] * (a[3] * a[8] - a[5] * a[6])
             + a[2] * (a[3] * a[7] - a[4] * a[6]);
    }

    Matrix3 inverse() const;

    /// Frobenius norm, |B| = sqrt(Tr(B^T B)).
    double norm() const {
        double s = 0.0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }

    Matrix3 sym() const {
        Matrix3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
        return r;
    }
    Matrix3 skew() const {
        Matrix3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = 0.5 * ((*this)(i, j) - (*this)(j, i));
        return r;
    }

    double dot(const Matrix3& o) const {
        double s = 0.0;
        for (int i = 0; i < 9; ++i) s += a[i] * o.a[i];
        return s;
    }

    bool det_positive() const { return det() > 0.0; }

    /// F^T F = I and det F = 1, each entry within tol.
    bool is_rotation(double tol) const;
};

inline Matrix3 operator*(double s, const Matrix3& m) { return m * s; }

/// Rotation by `angle` about the (normalized) axis, Rodrigues formula.
Matrix3 rotation_about_axis(const Vec3& axis, double angle);

/// Eigenvalues of a symmetric n x n matrix (row-major, only the symmetric
/// part is used), ascending. Cyclic Jacobi; intended for small n.
std::vector<double> symmetric_eigenvalues(const double* m, int n);

/// Eigen-decomposition of the symmetric part of a 3x3 matrix.
/// Returns eigenvalues ascending and the matching orthonormal eigenvectors
/// as columns of `vectors`.
struct SymEig3 {
    std::array<double, 3> values{};
    Matrix3 vectors;
};
SymEig3 eigen_sym3(const Matrix3& m);

/// Singular values of F, ascending (square roots of eig(F^T F)).
std::array<double, 3> singular_values(const Matrix3& f);

/// Euclidean distance from F to the rotation group.
/// For det F > 0 this is the closed form sqrt(sum (sigma_i - 1)^2);
/// for det F <= 0 it minimizes |F - R| over a deterministic rotation
/// sample set followed by local axis-angle refinement.
double distance_to_rotations(const Matrix3& f);

}  // namespace incompressa
