#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "incompressa/matrix3.hpp"

namespace incompressa {

/// Marks the Dirichlet portion of the box boundary. Periodic domains wrap
/// in all directions and carry no Dirichlet nodes.
struct GammaMarker {
    enum class Kind { None, FullBoundary, Face, Periodic };
    Kind kind = Kind::None;
    int axis = 0;  // Face only
    int side = 0;  // Face only: 0 = low face, 1 = high face

    static GammaMarker none() { return {Kind::None, 0, 0}; }
    static GammaMarker full_boundary() { return {Kind::FullBoundary, 0, 0}; }
    static GammaMarker face(int axis, int side) { return {Kind::Face, axis, side}; }
    static GammaMarker periodic() { return {Kind::Periodic, 0, 0}; }

    bool operator==(const GammaMarker&) const = default;
};

/// Structured grid over a rectangular box. Node (i,j,k) sits at
/// (i dx, j dy, k dz); on periodic domains the spacing is L/n (the high face
/// wraps onto the low one), otherwise L/(n-1).
struct BoxDomain {
    double lx = 1.0, ly = 1.0, lz = 1.0;
    int nx = 3, ny = 3, nz = 3;
    GammaMarker gamma;

    BoxDomain() = default;
    BoxDomain(double lx_, double ly_, double lz_, int nx_, int ny_, int nz_, GammaMarker g);

    static BoxDomain unit(int n, GammaMarker g) { return {1.0, 1.0, 1.0, n, n, n, g}; }

    bool periodic() const { return gamma.kind == GammaMarker::Kind::Periodic; }
    int count(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    double extent(int axis) const { return axis == 0 ? lx : (axis == 1 ? ly : lz); }
    double spacing(int axis) const {
        return extent(axis) / (periodic() ? count(axis) : count(axis) - 1);
    }
    std::size_t node_count() const {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * ny + j) * nx + i;
    }
    void decompose(std::size_t idx, int& i, int& j, int& k) const {
        i = static_cast<int>(idx % nx);
        j = static_cast<int>((idx / nx) % ny);
        k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
    }
    Vec3 node(int i, int j, int k) const {
        return {i * spacing(0), j * spacing(1), k * spacing(2)};
    }
    bool on_boundary(int i, int j, int k) const {
        if (periodic()) return false;
        return i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1;
    }
    bool on_gamma(int i, int j, int k) const;

    /// Trapezoidal weight of the node (rectangle rule when periodic).
    double quad_weight(int i, int j, int k) const;

    bool operator==(const BoxDomain&) const = default;
};

struct ScalarField {
    BoxDomain domain;
    std::vector<double> data;

    ScalarField() = default;
    explicit ScalarField(const BoxDomain& d) : domain(d), data(d.node_count(), 0.0) {}

    double& operator[](std::size_t idx) { return data[idx]; }
    double operator[](std::size_t idx) const { return data[idx]; }
    double& at(int i, int j, int k) { return data[domain.index(i, j, k)]; }
    double at(int i, int j, int k) const { return data[domain.index(i, j, k)]; }

    void fill(const std::function<double(const Vec3&)>& f);
};

struct VectorField {
    BoxDomain domain;
    std::array<std::vector<double>, 3> comp;

    VectorField() = default;
    explicit VectorField(const BoxDomain& d) : domain(d) {
        for (auto& c : comp) c.assign(d.node_count(), 0.0);
    }

    Vec3 at(int i, int j, int k) const {
        const std::size_t idx = domain.index(i, j, k);
        return {comp[0][idx], comp[1][idx], comp[2][idx]};
    }
    Vec3 at(std::size_t idx) const { return {comp[0][idx], comp[1][idx], comp[2][idx]}; }
    void set(std::size_t idx, const Vec3& v) {
        comp[0][idx] = v.x;
        comp[1][idx] = v.y;
        comp[2][idx] = v.z;
    }

    void fill(const std::function<Vec3(const Vec3&)>& f);

    /// All Gamma-marked nodes carry |v| <= tol.
    bool satisfies_dirichlet(double tol) const;
    /// All Gamma-marked nodes match the given data within tol.
    bool satisfies_dirichlet(const VectorField& data, double tol) const;

    VectorField& add_scaled(const VectorField& o, double s);
};

struct TensorField {
    BoxDomain domain;
    std::array<std::vector<double>, 9> comp;  // comp[3*r + c] = (grad v)_{rc}

    TensorField() = default;
    explicit TensorField(const BoxDomain& d) : domain(d) {
        for (auto& c : comp) c.assign(d.node_count(), 0.0);
    }

    Matrix3 at(std::size_t idx) const {
        Matrix3 m;
        for (int c = 0; c < 9; ++c) m.a[c] = comp[c][idx];
        return m;
    }
    Matrix3 at(int i, int j, int k) const { return at(domain.index(i, j, k)); }
    void set(std::size_t idx, const Matrix3& m) {
        for (int c = 0; c < 9; ++c) comp[c][idx] = m.a[c];
    }
};

/// Second-order nodal gradient: central differences at interior nodes,
/// one-sided second-order stencils at boundary nodes, wrap-around when
/// periodic. (grad v)_{ca} = d v_c / d x_a.
TensorField gradient(const VectorField& v);

ScalarField divergence(const VectorField& v);
VectorField curl(const VectorField& v);
/// Symmetric part of the gradient (symmetric by construction).
TensorField strain(const VectorField& v);

/// Exact adjoint of `gradient` in the unweighted nodal inner product:
/// out_c = sum_a D_a^T s_{ca}. Callers fold quadrature weights into s first.
VectorField gradient_adjoint(const TensorField& s);

/// Raw per-axis derivative (the operator behind `gradient`) on a flat nodal
/// array; `in` and `out` must hold node_count() values and not alias.
void apply_axis_derivative(const BoxDomain& d, int axis, const double* in, double* out);

/// Trapezoidal quadrature (rectangle rule on periodic domains).
double integrate(const ScalarField& f);
/// Quadrature of `integrand` evaluated per node index.
double integrate(const BoxDomain& d, const std::function<double(std::size_t)>& integrand);

double lp_norm(const ScalarField& f, double p);
/// (int |v|^p + int |grad v|^p)^{1/p}.
double w1p_norm(const VectorField& v, double p);
/// W^{1,p} distance between two fields on the same grid.
double w1p_distance(const VectorField& a, const VectorField& b, double p);

struct GrisvardCheck {
    double lhs = 0.0;  // int |grad zeta|^2
    double rhs = 0.0;  // int |curl zeta|^2 + int |div zeta|^2
    double gap = 0.0;
};

/// Discrete form of the gradient/curl/divergence identity for fields that
/// vanish on the whole boundary (the boundary terms of the full identity
/// drop out). Throws if zeta has a nonzero boundary trace.
GrisvardCheck grisvard_identity_check(const VectorField& zeta, double trace_tol = 1e-12);

/// Flat binary serialization: fixed header (magic, component count, node
/// counts, marker, extents) followed by the nodal arrays in x-fastest order,
/// IEEE doubles in native little-endian byte order.
void save_vector_field(const std::string& path, const VectorField& v);
VectorField load_vector_field(const std::string& path);
void save_scalar_field(const std::string& path, const ScalarField& f);
ScalarField load_scalar_field(const std::string& path);

/// Serial reference implementations of the parallel kernels; kept for
/// testing and benchmarked against the OpenMP versions.
namespace serial {
TensorField gradient(const VectorField& v);
double integrate(const ScalarField& f);
VectorField gradient_adjoint(const TensorField& s);
}  // namespace serial

}  // namespace incompressa
