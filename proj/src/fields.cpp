#include "incompressa/fields.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "incompressa/parallel.hpp"

namespace incompressa {

BoxDomain::BoxDomain(double lx_, double ly_, double lz_, int nx_, int ny_, int nz_, GammaMarker g)
    : lx(lx_), ly(ly_), lz(lz_), nx(nx_), ny(ny_), nz(nz_), gamma(g) {
    if (lx <= 0.0 || ly <= 0.0 || lz <= 0.0)
        throw std::invalid_argument("BoxDomain: extents must be positive");
    if (nx < 3 || ny < 3 || nz < 3)
        throw std::invalid_argument("BoxDomain: need at least 3 nodes per axis");
    if (gamma.kind == GammaMarker::Kind::Face && (gamma.axis < 0 || gamma.axis > 2))
        throw std::invalid_argument("BoxDomain: face axis out of range");
}

bool BoxDomain::on_gamma(int i, int j, int k) const {
    switch (gamma.kind) {
        case GammaMarker::Kind::None:
        case GammaMarker::Kind::Periodic:
            return false;
        case GammaMarker::Kind::FullBoundary:
            return on_boundary(i, j, k);
        case GammaMarker::Kind::Face: {
            const int idx = gamma.axis == 0 ? i : (gamma.axis == 1 ? j : k);
            return idx == (gamma.side == 0 ? 0 : count(gamma.axis) - 1);
        }
    }
    return false;
}

double BoxDomain::quad_weight(int i, int j, int k) const {
    auto axis_w = [this](int axis, int idx) {
        const double d = spacing(axis);
        if (periodic()) return d;
        return (idx == 0 || idx == count(axis) - 1) ? 0.5 * d : d;
    };
    return axis_w(0, i) * axis_w(1, j) * axis_w(2, k);
}

void ScalarField::fill(const std::function<double(const Vec3&)>& f) {
    const BoxDomain& d = domain;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(d.node_count()); ++idx) {
        int i, j, k;
        d.decompose(static_cast<std::size_t>(idx), i, j, k);
        data[static_cast<std::size_t>(idx)] = f(d.node(i, j, k));
    }
}

void VectorField::fill(const std::function<Vec3(const Vec3&)>& f) {
    const BoxDomain& d = domain;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(d.node_count()); ++idx) {
        int i, j, k;
        d.decompose(static_cast<std::size_t>(idx), i, j, k);
        set(static_cast<std::size_t>(idx), f(d.node(i, j, k)));
    }
}

bool VectorField::satisfies_dirichlet(double tol) const {
    const BoxDomain& d = domain;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (!d.on_gamma(i, j, k)) continue;
                const Vec3 v = at(i, j, k);
                if (std::abs(v.x) > tol || std::abs(v.y) > tol || std::abs(v.z) > tol)
                    return false;
            }
    return true;
}

bool VectorField::satisfies_dirichlet(const VectorField& data_, double tol) const {
    const BoxDomain& d = domain;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (!d.on_gamma(i, j, k)) continue;
                const Vec3 g = at(i, j, k) - data_.at(i, j, k);
                if (std::abs(g.x) > tol || std::abs(g.y) > tol || std::abs(g.z) > tol)
                    return false;
            }
    return true;
}

VectorField& VectorField::add_scaled(const VectorField& o, double s) {
    for (int c = 0; c < 3; ++c) {
        double* a = comp[c].data();
        const double* b = o.comp[c].data();
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(comp[c].size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) a[i] += s * b[i];
    }
    return *this;
}

namespace {

// One derivative line: second-order central in the interior, one-sided
// second-order rows at the two ends, wrap when periodic.
void derivative_line(const double* u, double* out, int n, std::size_t s, double inv2d,
                     bool periodic) {
    if (periodic) {
        out[0] = (u[s] - u[static_cast<std::size_t>(n - 1) * s]) * inv2d;
        for (int i = 1; i < n - 1; ++i)
            out[i * s] = (u[(i + 1) * s] - u[(i - 1) * s]) * inv2d;
        out[static_cast<std::size_t>(n - 1) * s] =
            (u[0] - u[static_cast<std::size_t>(n - 2) * s]) * inv2d;
        return;
    }
    out[0] = (-3.0 * u[0] + 4.0 * u[s] - u[2 * s]) * inv2d;
    for (int i = 1; i < n - 1; ++i)
        out[i * s] = (u[(i + 1) * s] - u[(i - 1) * s]) * inv2d;
    out[static_cast<std::size_t>(n - 1) * s] =
        (3.0 * u[static_cast<std::size_t>(n - 1) * s] -
         4.0 * u[static_cast<std::size_t>(n - 2) * s] +
         u[static_cast<std::size_t>(n - 3) * s]) * inv2d;
}

// Exact transpose of derivative_line; accumulates into a zeroed line.
void derivative_transpose_line(const double* u, double* out, int n, std::size_t s, double inv2d,
                               bool periodic) {
    for (int i = 0; i < n; ++i) out[i * s] = 0.0;
    if (periodic) {
        for (int i = 0; i < n; ++i) {
            const int ip = (i + 1) % n, im = (i - 1 + n) % n;
            out[ip * s] += u[i * s] * inv2d;
            out[im * s] -= u[i * s] * inv2d;
        }
        return;
    }
    out[0] += -3.0 * inv2d * u[0];
    out[s] += 4.0 * inv2d * u[0];
    out[2 * s] += -inv2d * u[0];
    for (int i = 1; i < n - 1; ++i) {
        out[(i - 1) * s] -= inv2d * u[i * s];
        out[(i + 1) * s] += inv2d * u[i * s];
    }
    const double un = u[static_cast<std::size_t>(n - 1) * s];
    out[static_cast<std::size_t>(n - 3) * s] += inv2d * un;
    out[static_cast<std::size_t>(n - 2) * s] += -4.0 * inv2d * un;
    out[static_cast<std::size_t>(n - 1) * s] += 3.0 * inv2d * un;
}

std::size_t axis_stride(const BoxDomain& d, int axis) {
    return axis == 0 ? 1
         : axis == 1 ? static_cast<std::size_t>(d.nx)
                     : static_cast<std::size_t>(d.nx) * d.ny;
}

template <class LineFn>
void sweep_lines(const BoxDomain& d, int axis, bool parallel, LineFn&& fn) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    const std::size_t s1 = axis_stride(d, a1), s2 = axis_stride(d, a2);
    const int n1 = d.count(a1), n2 = d.count(a2);
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(n1) * n2;
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t t = 0; t < total; ++t)
            fn(static_cast<std::size_t>(t % n1) * s1 + static_cast<std::size_t>(t / n1) * s2);
    } else {
        for (std::ptrdiff_t t = 0; t < total; ++t)
            fn(static_cast<std::size_t>(t % n1) * s1 + static_cast<std::size_t>(t / n1) * s2);
    }
}

void apply_derivative(const BoxDomain& d, int axis, const double* in, double* out,
                      bool parallel) {
    const int n = d.count(axis);
    const std::size_t s = axis_stride(d, axis);
    const double inv2d = 0.5 / d.spacing(axis);
    const bool per = d.periodic();
    sweep_lines(d, axis, parallel,
                [&](std::size_t base) { derivative_line(in + base, out + base, n, s, inv2d, per); });
}

void apply_derivative_transpose(const BoxDomain& d, int axis, const double* in, double* out,
                                bool parallel) {
    const int n = d.count(axis);
    const std::size_t s = axis_stride(d, axis);
    const double inv2d = 0.5 / d.spacing(axis);
    const bool per = d.periodic();
    sweep_lines(d, axis, parallel, [&](std::size_t base) {
        derivative_transpose_line(in + base, out + base, n, s, inv2d, per);
    });
}

TensorField gradient_impl(const VectorField& v, bool parallel) {
    TensorField g(v.domain);
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            apply_derivative(v.domain, a, v.comp[c].data(), g.comp[3 * c + a].data(), parallel);
    return g;
}

VectorField gradient_adjoint_impl(const TensorField& s, bool parallel) {
    VectorField out(s.domain);
    std::vector<double> tmp(s.domain.node_count());
    for (int c = 0; c < 3; ++c) {
        for (int a = 0; a < 3; ++a) {
            apply_derivative_transpose(s.domain, a, s.comp[3 * c + a].data(), tmp.data(),
                                       parallel);
            double* oc = out.comp[c].data();
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(tmp.size());
            if (parallel) {
#pragma omp parallel for schedule(static)
                for (std::ptrdiff_t i = 0; i < n; ++i) oc[i] += tmp[static_cast<std::size_t>(i)];
            } else {
                for (std::ptrdiff_t i = 0; i < n; ++i) oc[i] += tmp[static_cast<std::size_t>(i)];
            }
        }
    }
    return out;
}

}  // namespace

TensorField gradient(const VectorField& v) { return gradient_impl(v, true); }

void apply_axis_derivative(const BoxDomain& d, int axis, const double* in, double* out) {
    apply_derivative(d, axis, in, out, true);
}

ScalarField divergence(const VectorField& v) {
    ScalarField out(v.domain);
    std::vector<double> tmp(v.domain.node_count());
    for (int a = 0; a < 3; ++a) {
        apply_derivative(v.domain, a, v.comp[a].data(), tmp.data(), true);
        double* o = out.data.data();
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(tmp.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) o[i] += tmp[static_cast<std::size_t>(i)];
    }
    return out;
}

VectorField curl(const VectorField& v) {
    const TensorField g = gradient(v);
    VectorField out(v.domain);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.domain.node_count());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i);
        // (curl v)_c = eps_{cab} d_a v_b = g(b, a) pattern
        out.comp[0][idx] = g.comp[3 * 2 + 1][idx] - g.comp[3 * 1 + 2][idx];
        out.comp[1][idx] = g.comp[3 * 0 + 2][idx] - g.comp[3 * 2 + 0][idx];
        out.comp[2][idx] = g.comp[3 * 1 + 0][idx] - g.comp[3 * 0 + 1][idx];
    }
    return out;
}

TensorField strain(const VectorField& v) {
    TensorField g = gradient(v);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.domain.node_count());
    for (int r = 0; r < 3; ++r)
        for (int c = r + 1; c < 3; ++c) {
            double* up = g.comp[3 * r + c].data();
            double* lo = g.comp[3 * c + r].data();
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                const double m = 0.5 * (up[i] + lo[i]);
                up[i] = m;
                lo[i] = m;
            }
        }
    return g;
}

VectorField gradient_adjoint(const TensorField& s) { return gradient_adjoint_impl(s, true); }

double integrate(const ScalarField& f) {
    const BoxDomain& d = f.domain;
    return chunked_sum(static_cast<std::ptrdiff_t>(d.node_count()), [&](std::ptrdiff_t t) {
        int i, j, k;
        d.decompose(static_cast<std::size_t>(t), i, j, k);
        return d.quad_weight(i, j, k) * f.data[static_cast<std::size_t>(t)];
    });
}

double integrate(const BoxDomain& d, const std::function<double(std::size_t)>& integrand) {
    return chunked_sum(static_cast<std::ptrdiff_t>(d.node_count()), [&](std::ptrdiff_t t) {
        int i, j, k;
        d.decompose(static_cast<std::size_t>(t), i, j, k);
        return d.quad_weight(i, j, k) * integrand(static_cast<std::size_t>(t));
    });
}

double lp_norm(const ScalarField& f, double p) {
    const double s = integrate(f.domain, [&](std::size_t idx) {
        return std::pow(std::abs(f.data[idx]), p);
    });
    return std::pow(s, 1.0 / p);
}

double w1p_norm(const VectorField& v, double p) {
    const TensorField g = gradient(v);
    const BoxDomain& d = v.domain;
    const double s = integrate(d, [&](std::size_t idx) {
        const Vec3 val = v.at(idx);
        double v2 = val.dot(val);
        double g2 = 0.0;
        for (int c = 0; c < 9; ++c) g2 += g.comp[c][idx] * g.comp[c][idx];
        return std::pow(v2, 0.5 * p) + std::pow(g2, 0.5 * p);
    });
    return std::pow(s, 1.0 / p);
}

double w1p_distance(const VectorField& a, const VectorField& b, double p) {
    if (!(a.domain == b.domain)) throw std::invalid_argument("w1p_distance: domain mismatch");
    VectorField diff = a;
    diff.add_scaled(b, -1.0);
    return w1p_norm(diff, p);
}

GrisvardCheck grisvard_identity_check(const VectorField& zeta, double trace_tol) {
    const BoxDomain& d = zeta.domain;
    if (d.periodic())
        throw std::invalid_argument("grisvard_identity_check: needs a bounded domain");
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (!d.on_boundary(i, j, k)) continue;
                const Vec3 v = zeta.at(i, j, k);
                if (std::abs(v.x) > trace_tol || std::abs(v.y) > trace_tol ||
                    std::abs(v.z) > trace_tol)
                    throw std::invalid_argument(
                        "grisvard_identity_check: zeta has nonzero boundary trace");
            }

    const TensorField g = gradient(zeta);
    const VectorField c = curl(zeta);
    const ScalarField dv = divergence(zeta);

    GrisvardCheck out;
    out.lhs = integrate(d, [&](std::size_t idx) {
        double s = 0.0;
        for (int q = 0; q < 9; ++q) s += g.comp[q][idx] * g.comp[q][idx];
        return s;
    });
    out.rhs = integrate(d, [&](std::size_t idx) {
        const Vec3 cv = c.at(idx);
        return cv.dot(cv) + dv.data[idx] * dv.data[idx];
    });
    out.gap = std::abs(out.lhs - out.rhs);
    return out;
}

namespace {

constexpr char kMagic[8] = {'I', 'N', 'C', 'F', 'L', 'D', '0', '1'};

void write_header(std::ofstream& os, const BoxDomain& d, int32_t ncomp) {
    os.write(kMagic, 8);
    const int32_t ints[8] = {ncomp,
                             d.nx,
                             d.ny,
                             d.nz,
                             static_cast<int32_t>(d.gamma.kind),
                             d.gamma.axis,
                             d.gamma.side,
                             0};
    os.write(reinterpret_cast<const char*>(ints), sizeof(ints));
    const double ext[3] = {d.lx, d.ly, d.lz};
    os.write(reinterpret_cast<const char*>(ext), sizeof(ext));
}

BoxDomain read_header(std::ifstream& is, int32_t& ncomp) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("field file: bad magic");
    int32_t ints[8];
    is.read(reinterpret_cast<char*>(ints), sizeof(ints));
    double ext[3];
    is.read(reinterpret_cast<char*>(ext), sizeof(ext));
    if (!is) throw std::runtime_error("field file: truncated header");
    ncomp = ints[0];
    GammaMarker g{static_cast<GammaMarker::Kind>(ints[4]), ints[5], ints[6]};
    return BoxDomain(ext[0], ext[1], ext[2], ints[1], ints[2], ints[3], g);
}

}  // namespace

void save_vector_field(const std::string& path, const VectorField& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_vector_field: cannot open " + path);
    write_header(os, v.domain, 3);
    for (const auto& c : v.comp)
        os.write(reinterpret_cast<const char*>(c.data()),
                 static_cast<std::streamsize>(c.size() * sizeof(double)));
    if (!os) throw std::runtime_error("save_vector_field: write failed for " + path);
}

VectorField load_vector_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_vector_field: cannot open " + path);
    int32_t ncomp = 0;
    const BoxDomain d = read_header(is, ncomp);
    if (ncomp != 3) throw std::runtime_error("load_vector_field: not a 3-component field");
    VectorField v(d);
    for (auto& c : v.comp) {
        is.read(reinterpret_cast<char*>(c.data()),
                static_cast<std::streamsize>(c.size() * sizeof(double)));
    }
    if (!is) throw std::runtime_error("load_vector_field: truncated data");
    return v;
}

void save_scalar_field(const std::string& path, const ScalarField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_scalar_field: cannot open " + path);
    write_header(os, f.domain, 1);
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("save_scalar_field: write failed for " + path);
}

ScalarField load_scalar_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_scalar_field: cannot open " + path);
    int32_t ncomp = 0;
    const BoxDomain d = read_header(is, ncomp);
    if (ncomp != 1) throw std::runtime_error("load_scalar_field: not a scalar field");
    ScalarField f(d);
    is.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_scalar_field: truncated data");
    return f;
}

namespace serial {

TensorField gradient(const VectorField& v) { return gradient_impl(v, false); }

double integrate(const ScalarField& f) {
    const BoxDomain& d = f.domain;
    double s = 0.0;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) s += d.quad_weight(i, j, k) * f.at(i, j, k);
    return s;
}

VectorField gradient_adjoint(const TensorField& s) { return gradient_adjoint_impl(s, false); }

}  // namespace serial

}  // namespace incompressa
