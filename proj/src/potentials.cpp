#include "incompressa/potentials.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "incompressa/parallel.hpp"

namespace incompressa {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double l2_norm_vec(const VectorField& v) {
    const double s = integrate(v.domain, [&](std::size_t idx) {
        const Vec3 val = v.at(idx);
        return val.dot(val);
    });
    return std::sqrt(std::max(0.0, s));
}

double l2_norm_flat(const BoxDomain& d, const std::vector<double>& x) {
    const double cell = d.spacing(0) * d.spacing(1) * d.spacing(2);
    const double s = chunked_sum(static_cast<std::ptrdiff_t>(x.size()), [&](std::ptrdiff_t i) {
        return x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    });
    return std::sqrt(cell * s);
}

// Negative of the composed second-difference Laplacian, -sum_a D_a D_a.
// Matches the operator algebra of `gradient`/`divergence` exactly, so the
// divergence of the projected field equals the final CG residual.
void neg_wide_laplacian(const BoxDomain& d, const std::vector<double>& in,
                        std::vector<double>& out, std::vector<double>& t1,
                        std::vector<double>& t2) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = 0.0;
    for (int a = 0; a < 3; ++a) {
        apply_axis_derivative(d, a, in.data(), t1.data());
        apply_axis_derivative(d, a, t1.data(), t2.data());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] -= t2[static_cast<std::size_t>(i)];
    }
}

struct CgOutcome {
    int iterations = 0;
    double residual = 0.0;  // L2-quadrature norm
};

// Plain conjugate gradients with deterministic chunked reductions.
CgOutcome conjugate_gradient(
    const BoxDomain& d,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
    const std::vector<double>& b, std::vector<double>& x, double tol_abs, int max_iter,
    const char* what) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(b.size());
    const double cell = d.spacing(0) * d.spacing(1) * d.spacing(2);
    std::vector<double> r = b, p = b, ap(b.size());

    auto dot = [&](const std::vector<double>& u, const std::vector<double>& v) {
        return chunked_sum(n, [&](std::ptrdiff_t i) {
            return u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        });
    };

    double rr = dot(r, r);
    CgOutcome out;
    out.residual = std::sqrt(cell * rr);
    if (out.residual <= tol_abs) return out;

    for (int it = 1; it <= max_iter; ++it) {
        apply(p, ap);
        const double pap = dot(p, ap);
        if (pap <= 0.0) {
            std::ostringstream msg;
            msg << what << ": operator not positive definite (p^T A p = " << pap << ")";
            throw std::runtime_error(msg.str());
        }
        const double alpha = rr / pap;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * ap[static_cast<std::size_t>(i)];
        }
        const double rr_next = dot(r, r);
        out.iterations = it;
        out.residual = std::sqrt(cell * rr_next);
        if (out.residual <= tol_abs) return out;
        const double beta = rr_next / rr;
        rr = rr_next;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            p[static_cast<std::size_t>(i)] =
                r[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }
    std::ostringstream msg;
    msg << what << ": no convergence within " << max_iter
        << " iterations, final residual " << out.residual;
    throw std::runtime_error(msg.str());
}

void subtract_mean(const BoxDomain& d, std::vector<double>& x) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    const double mean =
        chunked_sum(n, [&](std::ptrdiff_t i) { return x[static_cast<std::size_t>(i)]; }) /
        static_cast<double>(d.node_count());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] -= mean;
}

}  // namespace

VectorField leray_project(const VectorField& v, double tol, int max_iter) {
    const BoxDomain& d = v.domain;
    if (!d.periodic()) throw std::invalid_argument("leray_project: needs a periodic domain");

    const double scale = std::max(l2_norm_vec(v), 1e-300);
    const ScalarField divv = divergence(v);
    std::vector<double> rhs = divv.data;
    subtract_mean(d, rhs);
    // solve -Lap phi = -div v, i.e. phi with Lap phi = div v
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rhs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] *= -1.0;

    std::vector<double> phi(rhs.size(), 0.0), t1(rhs.size()), t2(rhs.size());
    auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
        neg_wide_laplacian(d, in, out, t1, t2);
    };
    conjugate_gradient(d, apply, rhs, phi, tol * scale, max_iter, "leray_project");

    VectorField out = v;
    std::vector<double> grad_phi(phi.size());
    for (int a = 0; a < 3; ++a) {
        apply_axis_derivative(d, a, phi.data(), grad_phi.data());
        double* oc = out.comp[a].data();
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            oc[static_cast<std::size_t>(i)] -= grad_phi[static_cast<std::size_t>(i)];
    }
    return out;
}

VectorField curl_inverse(const VectorField& v, double tol, int max_iter) {
    const BoxDomain& d = v.domain;
    if (!d.periodic()) throw std::invalid_argument("curl_inverse: needs a periodic domain");

    const double scale = std::max(l2_norm_vec(v), 1e-300);
    const double volume = d.lx * d.ly * d.lz;
    for (int c = 0; c < 3; ++c) {
        const double mean = chunked_sum(static_cast<std::ptrdiff_t>(v.comp[c].size()),
                                        [&](std::ptrdiff_t i) {
                                            return v.comp[c][static_cast<std::size_t>(i)];
                                        }) /
                            static_cast<double>(d.node_count());
        if (std::abs(mean) * std::sqrt(volume) > 10.0 * tol * scale)
            throw std::invalid_argument(
                "curl_inverse: constant field is not a curl (nonzero component mean)");
    }
    {
        const ScalarField divv = divergence(v);
        if (l2_norm_flat(d, divv.data) > 10.0 * tol * scale)
            throw std::invalid_argument("curl_inverse: field is not divergence-free within tol");
    }

    const VectorField cv = curl(v);
    VectorField w(d);
    std::vector<double> t1(d.node_count()), t2(d.node_count());
    auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
        neg_wide_laplacian(d, in, out, t1, t2);
    };
    for (int c = 0; c < 3; ++c) {
        std::vector<double> rhs = cv.comp[c];
        subtract_mean(d, rhs);
        conjugate_gradient(d, apply, rhs, w.comp[c], tol * scale, max_iter, "curl_inverse");
    }

    VectorField check = curl(w);
    check.add_scaled(v, -1.0);
    const double defect = l2_norm_vec(check);
    if (defect > 10.0 * tol * scale) {
        std::ostringstream msg;
        msg << "curl_inverse: round-trip defect " << defect << " exceeds " << 10.0 * tol * scale;
        throw std::runtime_error(msg.str());
    }
    return w;
}

AnalyticVelocity curl_of_trig(const std::vector<TrigMode>& modes, const std::string& name) {
    AnalyticVelocity v;
    v.name = name;
    v.value = [modes](const Vec3& x) {
        Vec3 out;
        for (const TrigMode& m : modes) {
            const double arg = kTwoPi * m.k.dot(x) + m.phase;
            out += (kTwoPi * std::cos(arg)) * m.k.cross(m.amplitude);
        }
        return out;
    };
    v.jacobian = [modes](const Vec3& x) {
        Matrix3 g;
        for (const TrigMode& m : modes) {
            const double arg = kTwoPi * m.k.dot(x) + m.phase;
            const Vec3 ka = m.k.cross(m.amplitude);
            const double f = -kTwoPi * kTwoPi * std::sin(arg);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) g(r, c) += f * ka[r] * m.k[c];
        }
        return g;
    };
    v.divergence_free = true;
    return v;
}

namespace {

// Per-axis C2 bump profile (1 - u^2)^3, u = 2t - 1, supported on [0,1];
// value and first two derivatives vanish at the endpoints.
double bump_f(double t) {
    const double u = 2.0 * t - 1.0;
    const double s = 1.0 - u * u;
    return s > 0.0 ? s * s * s : 0.0;
}
double bump_d1(double t) {
    const double u = 2.0 * t - 1.0;
    const double s = 1.0 - u * u;
    return s > 0.0 ? 2.0 * (-6.0 * u * s * s) : 0.0;
}
double bump_d2(double t) {
    const double u = 2.0 * t - 1.0;
    const double s = 1.0 - u * u;
    return s > 0.0 ? 4.0 * (-6.0 * s * s + 24.0 * u * u * s) : 0.0;
}

}  // namespace

AnalyticVelocity curl_of_bump_linear() {
    AnalyticVelocity v;
    v.name = "curl_bump";
    // potential (0, 0, s) with s = x * bump(x) bump(y) bump(z)
    v.value = [](const Vec3& p) {
        const double bx = bump_f(p.x), by = bump_f(p.y), bz = bump_f(p.z);
        const double dy = bump_d1(p.y);
        const double sx = bx + p.x * bump_d1(p.x);
        return Vec3{p.x * bx * dy * bz, -sx * by * bz, 0.0};
    };
    v.jacobian = [](const Vec3& p) {
        const double bx = bump_f(p.x), by = bump_f(p.y), bz = bump_f(p.z);
        const double dx = bump_d1(p.x), dy = bump_d1(p.y), dz = bump_d1(p.z);
        const double ddx = bump_d2(p.x), ddy = bump_d2(p.y), ddz = bump_d2(p.z);
        const double sx = bx + p.x * dx;        // d(x bump)/dx
        const double sxx = 2.0 * dx + p.x * ddx;  // d2(x bump)/dx2
        Matrix3 g;
        g(0, 0) = sx * dy * bz;
        g(0, 1) = p.x * bx * ddy * bz;
        g(0, 2) = p.x * bx * dy * dz;
        g(1, 0) = -sxx * by * bz;
        g(1, 1) = -sx * dy * bz;
        g(1, 2) = -sx * by * dz;
        return g;
    };
    v.divergence_free = true;
    v.zero_set = GammaMarker::full_boundary();
    return v;
}

AnalyticVelocity make_analytic_divfree(const std::string& name,
                                       const std::map<std::string, std::string>& params) {
    auto num = [&params](const std::string& key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : std::stod(it->second);
    };
    if (name == "zero") return velocity_zero();
    if (name == "rigid")
        return velocity_rigid({num("omega_x", 0.0), num("omega_y", 0.0), num("omega_z", 1.0)});
    if (name == "shear")
        return velocity_shear(static_cast<int>(num("axis_i", 0)),
                              static_cast<int>(num("axis_j", 1)));
    if (name == "abc") return velocity_abc(num("a", 1.0), num("b", 1.0), num("c", 1.0));
    if (name == "curl_trig") {
        const std::vector<TrigMode> modes = {
            {{0, 1, 1}, {1.0, 0.0, 0.0}, 0.0},
            {{1, 0, 2}, {0.0, 0.7, 0.0}, 0.3},
            {{1, 1, 0}, {0.0, 0.0, -0.5}, 1.1},
        };
        return curl_of_trig(modes, "curl_trig");
    }
    if (name == "curl_bump") return curl_of_bump_linear();
    throw std::invalid_argument("make_analytic_divfree: unknown velocity '" + name + "'");
}

}  // namespace incompressa
