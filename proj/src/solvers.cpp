#include "incompressa/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "incompressa/parallel.hpp"

namespace incompressa {

namespace {

double quad_l2(const BoxDomain& d, const std::function<double(std::size_t)>& sq) {
    return std::sqrt(std::max(0.0, integrate(d, sq)));
}

double vec_quad_l2(const VectorField& v) {
    return quad_l2(v.domain, [&](std::size_t i) {
        const Vec3 x = v.at(i);
        return x.dot(x);
    });
}

// ------------------------------------------------------------------
// compact strong-form operator of the quadratic form (interior nodes)
// ------------------------------------------------------------------

struct OperatorCoeffs {
    bool isotropic = false;
    double a = 0.0;  // shear-block scale: H = a I + b m m^T when isotropic
    double b = 0.0;
    double c[3][3][3][3] = {};  // generic: Q(G) = sum C[c][a][e][b] G_ca G_eb
    double scale = 1.0;         // representative magnitude, used for stabilization
};

OperatorCoeffs make_coeffs(const ElasticityTensor& h) {
    OperatorCoeffs k;
    const double a = h(3, 3), b = h(0, 1);
    double worst = 0.0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double expect = 0.0;
            if (i == j) expect = (i < 3) ? a + b : a;
            else if (i < 3 && j < 3) expect = b;
            worst = std::max(worst, std::abs(h(i, j) - expect));
        }
    const double mag = std::abs(a) + std::abs(b);
    k.scale = std::max(mag, 1e-300);
    if (worst <= 1e-12 * std::max(1.0, mag)) {
        k.isotropic = true;
        k.a = a;
        k.b = b;
        return k;
    }
    // generic coefficients by polarization of the quadratic form
    auto unit = [](int r, int c) {
        Matrix3 m;
        m(r, c) = 1.0;
        return m;
    };
    double qdiag[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) qdiag[r][c] = quadratic_form(h, unit(r, c));
    for (int c = 0; c < 3; ++c)
        for (int a2 = 0; a2 < 3; ++a2)
            for (int e = 0; e < 3; ++e)
                for (int b2 = 0; b2 < 3; ++b2) {
                    const double q2 = quadratic_form(h, unit(c, a2) + unit(e, b2));
                    k.c[c][a2][e][b2] = 0.25 * (q2 - qdiag[c][a2] - qdiag[e][b2]) *
                                        ((c == e && a2 == b2) ? 2.0 : 1.0);
                }
    // diagonal polarization above double-counts the self pair; rebuild it
    for (int c = 0; c < 3; ++c)
        for (int a2 = 0; a2 < 3; ++a2) k.c[c][a2][c][a2] = 0.5 * qdiag[c][a2];
    return k;
}

struct GridGeom {
    int nx, ny, nz;
    std::size_t sx, sy, sz;
    double inv_d2[3];
    double inv_4dd[3][3];
};

GridGeom make_geom(const BoxDomain& d) {
    GridGeom g;
    g.nx = d.nx;
    g.ny = d.ny;
    g.nz = d.nz;
    g.sx = 1;
    g.sy = static_cast<std::size_t>(d.nx);
    g.sz = static_cast<std::size_t>(d.nx) * d.ny;
    for (int a = 0; a < 3; ++a) g.inv_d2[a] = 1.0 / (d.spacing(a) * d.spacing(a));
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            g.inv_4dd[a][b] = 1.0 / (4.0 * d.spacing(a) * d.spacing(b));
    return g;
}

// A v on interior nodes (outputs zero elsewhere); reads the full arrays, so
// pinned boundary values participate as data.
void apply_elastic_operator(const BoxDomain& d, const GridGeom& g, const OperatorCoeffs& k,
                            const VectorField& v, VectorField& out) {
    const std::size_t strides[3] = {g.sx, g.sy, g.sz};
    for (int c = 0; c < 3; ++c) std::fill(out.comp[c].begin(), out.comp[c].end(), 0.0);

    const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(g.nx - 2) * (g.ny - 2) * (g.nz - 2);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < ni; ++t) {
        const int i = 1 + static_cast<int>(t % (g.nx - 2));
        const int j = 1 + static_cast<int>((t / (g.nx - 2)) % (g.ny - 2));
        const int kk = 1 + static_cast<int>(t / ((g.nx - 2) * (g.ny - 2)));
        const std::size_t idx = (static_cast<std::size_t>(kk) * g.ny + j) * g.nx + i;

        double d2[3][3][3];  // d2[e][a][b] = second derivative of comp e
        for (int e = 0; e < 3; ++e) {
            const double* u = v.comp[e].data();
            for (int a = 0; a < 3; ++a)
                d2[e][a][a] =
                    (u[idx + strides[a]] - 2.0 * u[idx] + u[idx - strides[a]]) * g.inv_d2[a];
            for (int a = 0; a < 3; ++a)
                for (int b = a + 1; b < 3; ++b) {
                    const double cross = (u[idx + strides[a] + strides[b]] -
                                          u[idx + strides[a] - strides[b]] -
                                          u[idx - strides[a] + strides[b]] +
                                          u[idx - strides[a] - strides[b]]) *
                                         g.inv_4dd[a][b];
                    d2[e][a][b] = cross;
                    d2[e][b][a] = cross;
                }
        }

        if (k.isotropic) {
            const double half_a = 0.5 * k.a;
            const double graddiv = half_a + k.b;
            for (int c = 0; c < 3; ++c) {
                const double lap = d2[c][0][0] + d2[c][1][1] + d2[c][2][2];
                double gd = 0.0;
                for (int e = 0; e < 3; ++e) gd += d2[e][c][e];
                out.comp[c][idx] = -half_a * lap - graddiv * gd;
            }
        } else {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int a = 0; a < 3; ++a)
                    for (int e = 0; e < 3; ++e)
                        for (int b = 0; b < 3; ++b) s += k.c[c][a][e][b] * d2[e][a][b];
                out.comp[c][idx] = -s;
            }
        }
    }
}

// central pressure gradient on interior nodes (q lives on all nodes)
void apply_pressure_gradient(const BoxDomain& d, const GridGeom& g, const ScalarField& q,
                             VectorField& out) {
    const std::size_t strides[3] = {g.sx, g.sy, g.sz};
    const double inv2d[3] = {0.5 / d.spacing(0), 0.5 / d.spacing(1), 0.5 / d.spacing(2)};
    for (int c = 0; c < 3; ++c) std::fill(out.comp[c].begin(), out.comp[c].end(), 0.0);
    const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(g.nx - 2) * (g.ny - 2) * (g.nz - 2);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < ni; ++t) {
        const int i = 1 + static_cast<int>(t % (g.nx - 2));
        const int j = 1 + static_cast<int>((t / (g.nx - 2)) % (g.ny - 2));
        const int kk = 1 + static_cast<int>(t / ((g.nx - 2) * (g.ny - 2)));
        const std::size_t idx = (static_cast<std::size_t>(kk) * g.ny + j) * g.nx + i;
        const double* qd = q.data.data();
        for (int a = 0; a < 3; ++a)
            out.comp[a][idx] = (qd[idx + strides[a]] - qd[idx - strides[a]]) * inv2d[a];
    }
}

// compact Laplacian with homogeneous-Neumann mirror closure, all nodes
void apply_neumann_laplacian(const BoxDomain& d, const GridGeom& g, const ScalarField& q,
                             ScalarField& out) {
    const std::size_t strides[3] = {g.sx, g.sy, g.sz};
    const double* in = q.data.data();
    double* o = out.data.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.node_count());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::size_t idx = static_cast<std::size_t>(t);
        int ijk[3];
        d.decompose(idx, ijk[0], ijk[1], ijk[2]);
        double acc = 0.0;
        const int counts[3] = {g.nx, g.ny, g.nz};
        for (int a = 0; a < 3; ++a) {
            const int i = ijk[a];
            double lo, hi;
            if (i == 0) {
                lo = hi = in[idx + strides[a]];
            } else if (i == counts[a] - 1) {
                lo = hi = in[idx - strides[a]];
            } else {
                lo = in[idx - strides[a]];
                hi = in[idx + strides[a]];
            }
            acc += (hi - 2.0 * in[idx] + lo) * g.inv_d2[a];
        }
        o[idx] = acc;
    }
}

double field_dot(const VectorField& a, const VectorField& b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double* x = a.comp[c].data();
        const double* y = b.comp[c].data();
        s += chunked_sum(static_cast<std::ptrdiff_t>(a.comp[c].size()),
                         [&](std::ptrdiff_t i) { return x[i] * y[i]; });
    }
    return s;
}

double scalar_dot(const std::vector<double>& a, const std::vector<double>& b) {
    return chunked_sum(static_cast<std::ptrdiff_t>(a.size()), [&](std::ptrdiff_t i) {
        return a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
    });
}

void vf_axpy(VectorField& y, double alpha, const VectorField& x) { y.add_scaled(x, alpha); }

// CG for the elastic operator on interior-supported fields.
struct InnerSolveStats {
    long iterations = 0;
};

void elastic_cg(const BoxDomain& d, const GridGeom& g, const OperatorCoeffs& k,
                const VectorField& rhs, VectorField& x, double rel_tol, long max_iter,
                InnerSolveStats& stats) {
    VectorField r = rhs, ap(d);
    // x may carry a warm start
    apply_elastic_operator(d, g, k, x, ap);
    vf_axpy(r, -1.0, ap);
    VectorField p = r;
    double rr = field_dot(r, r);
    const double rhs_norm = std::sqrt(std::max(field_dot(rhs, rhs), 1e-300));
    const double stop = rel_tol * rhs_norm;
    if (std::sqrt(rr) <= stop) return;
    for (long it = 0; it < max_iter; ++it) {
        apply_elastic_operator(d, g, k, p, ap);
        const double pap = field_dot(p, ap);
        if (pap <= 0.0)
            throw std::runtime_error(
                "solve_linearized: elastic operator is not positive definite "
                "(ellipticity violation)");
        const double alpha = rr / pap;
        vf_axpy(x, alpha, p);
        vf_axpy(r, -alpha, ap);
        const double rr2 = field_dot(r, r);
        ++stats.iterations;
        if (std::sqrt(rr2) <= stop) return;
        const double beta = rr2 / rr;
        rr = rr2;
        for (int c = 0; c < 3; ++c) {
            double* pc = p.comp[c].data();
            const double* rc = r.comp[c].data();
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p.comp[c].size());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < n; ++i) pc[i] = rc[i] + beta * pc[i];
        }
    }
    throw std::runtime_error("solve_linearized: inner conjugate-gradient stall");
}

void subtract_mean_inplace(std::vector<double>& x) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    const double mean = chunked_sum(n, [&](std::ptrdiff_t i) {
                            return x[static_cast<std::size_t>(i)];
                        }) / static_cast<double>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] -= mean;
}

}  // namespace

double load_functional(const VectorField& f, const VectorField& v) {
    if (!(f.domain == v.domain)) throw std::invalid_argument("load_functional: domain mismatch");
    return integrate(f.domain, [&](std::size_t i) { return f.at(i).dot(v.at(i)); });
}

EnergyValue linearized_energy(const LinearizedProblem& p, const VectorField& v, double div_tol,
                              double bc_tol) {
    if (!(v.domain == p.domain))
        throw std::invalid_argument("linearized_energy: domain mismatch");
    const bool bc_ok = p.boundary_data ? v.satisfies_dirichlet(*p.boundary_data, bc_tol)
                                       : v.satisfies_dirichlet(bc_tol);
    if (!bc_ok)
        throw std::invalid_argument("linearized_energy: v violates the Dirichlet data");

    const ScalarField dv = divergence(v);
    const double div_norm = quad_l2(p.domain, [&](std::size_t i) {
        return dv.data[i] * dv.data[i];
    });
    if (div_norm > div_tol) return EnergyValue::infinite();

    const TensorField e = strain(v);
    const double elastic = integrate(p.domain, [&](std::size_t i) {
        return quadratic_form(p.tensor, e.at(i));
    });
    return EnergyValue::of(0.5 * elastic - load_functional(p.load, v));
}

SaddleSolution solve_linearized(const LinearizedProblem& p, double tol, int max_iter,
                                const std::optional<ScalarField>& q0) {
    const BoxDomain& d = p.domain;
    if (d.gamma.kind != GammaMarker::Kind::FullBoundary)
        throw std::invalid_argument(
            "solve_linearized: only Gamma = FullBoundary is supported");
    if (!(p.load.domain == d)) throw std::invalid_argument("solve_linearized: load domain");

    const GridGeom g = make_geom(d);
    const OperatorCoeffs k = make_coeffs(p.tensor);
    if (p.tensor.min_eigenvalue() <= 0.0)
        throw std::runtime_error("solve_linearized: elasticity tensor is not positive definite "
                                 "(ellipticity violation)");

    const double davg = (d.spacing(0) + d.spacing(1) + d.spacing(2)) / 3.0;
    const double eps = p.stab_beta * davg * davg / k.scale;

    // boundary extension of the Dirichlet data
    VectorField vbc(d);
    if (p.boundary_data) {
        for (int kk = 0; kk < d.nz; ++kk)
            for (int j = 0; j < d.ny; ++j)
                for (int i = 0; i < d.nx; ++i)
                    if (d.on_boundary(i, j, kk))
                        vbc.set(d.index(i, j, kk), p.boundary_data->at(i, j, kk));
    }

    // interior load with the boundary-data contribution moved across
    VectorField f_eff(d);
    {
        VectorField abc(d);
        apply_elastic_operator(d, g, k, vbc, abc);
        for (int c = 0; c < 3; ++c) {
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.node_count());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t t = 0; t < n; ++t) {
                const std::size_t idx = static_cast<std::size_t>(t);
                int i, j, kk;
                d.decompose(idx, i, j, kk);
                if (!d.on_boundary(i, j, kk))
                    f_eff.comp[c][idx] = p.load.comp[c][idx] - abc.comp[c][idx];
            }
        }
    }

    InnerSolveStats inner;
    const double inner_rel = std::max(1e-12, 1e-3 * tol);
    const long inner_cap = 200000;

    auto solve_a = [&](const VectorField& rhs, VectorField& x, double rel) {
        elastic_cg(d, g, k, rhs, x, rel, inner_cap, inner);
    };

    // rhs of the pressure system: -div(A^-1 f_eff + vbc)
    VectorField u0(d);
    solve_a(f_eff, u0, inner_rel);
    VectorField v0_full = u0;
    vf_axpy(v0_full, 1.0, vbc);
    ScalarField div_v0 = divergence(v0_full);
    std::vector<double> rhs_s(div_v0.data.size());
    {
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rhs_s.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            rhs_s[static_cast<std::size_t>(i)] = -div_v0.data[static_cast<std::size_t>(i)];
    }
    subtract_mean_inplace(rhs_s);

    // S q = -div(A^-1 grad q) - eps lap_N q, projected onto zero mean
    ScalarField tmp_q(d);
    VectorField gq(d), w(d);
    ScalarField lap(d);
    auto apply_s = [&](const std::vector<double>& qin, std::vector<double>& out) {
        tmp_q.data = qin;
        apply_pressure_gradient(d, g, tmp_q, gq);
        std::fill(w.comp[0].begin(), w.comp[0].end(), 0.0);
        std::fill(w.comp[1].begin(), w.comp[1].end(), 0.0);
        std::fill(w.comp[2].begin(), w.comp[2].end(), 0.0);
        solve_a(gq, w, inner_rel);
        const ScalarField divw = divergence(w);
        apply_neumann_laplacian(d, g, tmp_q, lap);
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            out[ii] = -divw.data[ii] - eps * lap.data[ii];
        }
        subtract_mean_inplace(out);
    };

    // BiCGStab on the pressure Schur system
    std::vector<double> q(d.node_count(), 0.0);
    if (q0) {
        if (q0->data.size() != q.size())
            throw std::invalid_argument("solve_linearized: q0 size mismatch");
        q = q0->data;
        subtract_mean_inplace(q);
    }
    const double cell = d.spacing(0) * d.spacing(1) * d.spacing(2);
    const double scale_c =
        std::max(std::sqrt(std::max(scalar_dot(rhs_s, rhs_s), 0.0) * cell), 1e-300);
    const double stop = tol * std::max(scale_c, 1e-12);

    std::vector<double> r(q.size()), rhat(q.size()), pv(q.size(), 0.0), vv(q.size(), 0.0),
        s(q.size()), t(q.size());
    apply_s(q, r);
    {
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(r.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            r[ii] = rhs_s[ii] - r[ii];
        }
    }
    rhat = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    int outer = 0;
    double resid = std::sqrt(std::max(scalar_dot(r, r), 0.0) * cell);
    std::vector<double> history{resid};

    while (resid > stop) {
        if (outer++ >= max_iter) {
            std::ostringstream msg;
            msg << "solve_linearized: pressure iteration exceeded " << max_iter
                << " iterations; residual history:";
            for (double hval : history) msg << " " << hval;
            throw std::runtime_error(msg.str());
        }
        const double rho_next = scalar_dot(rhat, r);
        if (std::abs(rho_next) < 1e-300)
            throw std::runtime_error("solve_linearized: pressure iteration breakdown");
        const double beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(q.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            pv[ii] = r[ii] + beta * (pv[ii] - omega * vv[ii]);
        }
        apply_s(pv, vv);
        alpha = rho / scalar_dot(rhat, vv);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            s[ii] = r[ii] - alpha * vv[ii];
        }
        const double s_norm = std::sqrt(std::max(scalar_dot(s, s), 0.0) * cell);
        if (s_norm <= stop) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i);
                q[ii] += alpha * pv[ii];
            }
            resid = s_norm;
            history.push_back(resid);
            break;
        }
        apply_s(s, t);
        const double tt = scalar_dot(t, t);
        if (tt < 1e-300)
            throw std::runtime_error("solve_linearized: pressure iteration breakdown");
        omega = scalar_dot(t, s) / tt;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i);
            q[ii] += alpha * pv[ii] + omega * s[ii];
            r[ii] = s[ii] - omega * t[ii];
        }
        resid = std::sqrt(std::max(scalar_dot(r, r), 0.0) * cell);
        history.push_back(resid);
    }

    subtract_mean_inplace(q);

    // final velocity solve at the converged pressure
    SaddleSolution sol;
    sol.q = ScalarField(d);
    sol.q.data = q;
    apply_pressure_gradient(d, g, sol.q, gq);
    VectorField rhs_v = f_eff;
    vf_axpy(rhs_v, -1.0, gq);
    VectorField v_int = u0;  // warm start from the load solve
    solve_a(rhs_v, v_int, std::max(1e-13, 1e-4 * tol));
    sol.v = v_int;
    vf_axpy(sol.v, 1.0, vbc);
    sol.outer_iterations = outer;
    sol.inner_iterations = inner.iterations;

    // residuals by independent application of the operators
    {
        VectorField av(d);
        apply_elastic_operator(d, g, k, sol.v, av);
        apply_pressure_gradient(d, g, sol.q, gq);
        double mr2 = 0.0;
        for (int kk = 1; kk < d.nz - 1; ++kk)
            for (int j = 1; j < d.ny - 1; ++j)
                for (int i = 1; i < d.nx - 1; ++i) {
                    const std::size_t idx = d.index(i, j, kk);
                    for (int c = 0; c < 3; ++c) {
                        const double rr =
                            av.comp[c][idx] + gq.comp[c][idx] - p.load.comp[c][idx];
                        mr2 += d.quad_weight(i, j, kk) * rr * rr;
                    }
                }
        sol.momentum_residual = std::sqrt(mr2);

        const ScalarField divv = divergence(sol.v);
        apply_neumann_laplacian(d, g, sol.q, lap);
        std::vector<double> cont = divv.data;
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cont.size());
        for (std::ptrdiff_t i = 0; i < n; ++i)
            cont[static_cast<std::size_t>(i)] -= eps * lap.data[static_cast<std::size_t>(i)];
        subtract_mean_inplace(cont);
        sol.continuity_residual = std::sqrt(std::max(scalar_dot(cont, cont), 0.0) * cell);
        sol.div_l2 = quad_l2(d, [&](std::size_t i) { return divv.data[i] * divv.data[i]; });
    }
    return sol;
}

// ------------------------------------------------------------------
// nonlinear functionals
// ------------------------------------------------------------------

namespace {

struct ObjectiveValue {
    bool finite = true;
    double value = 0.0;
    double max_det_err = 0.0;
};

// penalty/AL objective; lambda may be null (penalty mode)
ObjectiveValue eval_objective(const NonlinearProblem& p, const VectorField& v,
                              const std::vector<double>* lambda) {
    const BoxDomain& d = p.domain;
    const TensorField gv = gradient(v);
    const VolumetricModel pen{p.weight};
    const double inv_h2 = 1.0 / (p.h * p.h);

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.node_count());
    const std::ptrdiff_t nchunks = std::min<std::ptrdiff_t>(n, 512);
    std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
    std::vector<double> chunk_max(static_cast<std::size_t>(nchunks), 0.0);
    std::vector<char> chunk_ok(static_cast<std::size_t>(nchunks), 1);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        const std::ptrdiff_t lo = n * c / nchunks, hi = n * (c + 1) / nchunks;
        double acc = 0.0, worst = 0.0;
        bool ok = true;
        for (std::ptrdiff_t t = lo; t < hi && ok; ++t) {
            const std::size_t idx = static_cast<std::size_t>(t);
            int i, j, kk;
            d.decompose(idx, i, j, kk);
            const double wq = d.quad_weight(i, j, kk);
            const Matrix3 f = Matrix3::identity() + p.h * gv.at(idx);
            const double jdet = f.det();
            if (jdet <= 0.0) {
                ok = false;
                break;
            }
            worst = std::max(worst, std::abs(jdet - 1.0));
            const EnergyValue wv = energy(p.material, pen, f);
            double cell = inv_h2 * wv.value;
            if (lambda) cell += inv_h2 * (*lambda)[idx] * (jdet - 1.0);
            cell -= p.load.at(idx).dot(v.at(idx));
            if (p.cross_stress) cell += p.cross_stress->at(idx).dot(gv.at(idx));
            acc += wq * cell;
        }
        partial[static_cast<std::size_t>(c)] = acc;
        chunk_max[static_cast<std::size_t>(c)] = worst;
        chunk_ok[static_cast<std::size_t>(c)] = ok ? 1 : 0;
    }

    ObjectiveValue out;
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        if (!chunk_ok[static_cast<std::size_t>(c)]) out.finite = false;
        out.value += partial[static_cast<std::size_t>(c)];
        out.max_det_err = std::max(out.max_det_err, chunk_max[static_cast<std::size_t>(c)]);
    }
    out.value += p.energy_offset;
    return out;
}

// gradient of the objective with pinned Gamma nodes zeroed
VectorField grad_objective(const NonlinearProblem& p, const VectorField& v,
                           const std::vector<double>* lambda) {
    const BoxDomain& d = p.domain;
    const TensorField gv = gradient(v);
    const VolumetricModel pen{p.weight};
    const double inv_h = 1.0 / p.h;

    TensorField s(d);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.node_count());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::size_t idx = static_cast<std::size_t>(t);
        int i, j, kk;
        d.decompose(idx, i, j, kk);
        const double wq = d.quad_weight(i, j, kk);
        const Matrix3 f = Matrix3::identity() + p.h * gv.at(idx);
        Matrix3 pk = stress(p.material, pen, f) * inv_h;
        if (lambda)
            pk += (inv_h * (*lambda)[idx] * f.det()) * f.inverse().transpose();
        if (p.cross_stress) pk += p.cross_stress->at(idx);
        s.set(idx, wq * pk);
    }

    VectorField g = gradient_adjoint(s);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::size_t idx = static_cast<std::size_t>(t);
        int i, j, kk;
        d.decompose(idx, i, j, kk);
        const double wq = d.quad_weight(i, j, kk);
        const Vec3 f = p.load.at(idx);
        const bool pinned = d.on_gamma(i, j, kk);
        for (int c = 0; c < 3; ++c) {
            if (pinned)
                g.comp[c][idx] = 0.0;
            else
                g.comp[c][idx] -= wq * f[c];
        }
    }
    return g;
}

double incompressible_value(const NonlinearProblem& p, const VectorField& v) {
    const BoxDomain& d = p.domain;
    const TensorField gv = gradient(v);
    const double inv_h2 = 1.0 / (p.h * p.h);
    const double val = integrate(d, [&](std::size_t idx) {
        const Matrix3 f = Matrix3::identity() + p.h * gv.at(idx);
        const double jdet = f.det();
        const double s = std::pow(jdet, -1.0 / 3.0);
        const Matrix3 fb = s * f;
        const Matrix3 cb = fb.transpose() * fb;
        // isochoric density via the Ogden-family shared form
        VolumetricModel none{1.0};
        const double wiso = energy(p.material, none, fb).value;  // det fb = 1 => vol = 0
        (void)cb;
        double cell = inv_h2 * wiso - p.load.at(idx).dot(v.at(idx));
        if (p.cross_stress) cell += p.cross_stress->at(idx).dot(gv.at(idx));
        return cell;
    });
    return val + p.energy_offset;
}

}  // namespace

NonlinearEnergyReport nonlinear_energy(const NonlinearProblem& p, const VectorField& v) {
    NonlinearEnergyReport rep;
    const ObjectiveValue o = eval_objective(p, v, nullptr);
    rep.objective = o.finite ? EnergyValue::of(o.value) : EnergyValue::infinite();
    rep.max_det_err = o.max_det_err;
    rep.incompressible = o.finite ? incompressible_value(p, v) : 0.0;
    return rep;
}

namespace {

struct LbfgsOutcome {
    MinimizeStatus status = MinimizeStatus::Converged;
    long iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
    double max_det_err = 0.0;
};

LbfgsOutcome lbfgs_minimize(const NonlinearProblem& p, VectorField& v,
                            const std::vector<double>* lambda, double gtol) {
    const OptimizerOptions& o = p.opts;
    LbfgsOutcome out;

    ObjectiveValue fv = eval_objective(p, v, lambda);
    if (!fv.finite)
        throw std::invalid_argument("minimize_nonlinear: infeasible initial iterate (J <= 0)");
    VectorField g = grad_objective(p, v, lambda);
    double gnorm = std::sqrt(field_dot(g, g));

    std::deque<VectorField> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (long it = 0; it < o.max_iterations; ++it) {
        out.iterations = it;
        out.gradient_norm = gnorm;
        out.objective = fv.value;
        out.max_det_err = fv.max_det_err;
        if (gnorm <= gtol) {
            out.status = MinimizeStatus::Converged;
            return out;
        }

        // two-loop recursion
        VectorField dir = g;
        {
            const int m = static_cast<int>(s_hist.size());
            std::vector<double> alpha(m);
            for (int i = m - 1; i >= 0; --i) {
                alpha[i] = rho_hist[i] * field_dot(s_hist[i], dir);
                vf_axpy(dir, -alpha[i], y_hist[i]);
            }
            if (m > 0) {
                const double yy = field_dot(y_hist.back(), y_hist.back());
                const double sy = 1.0 / rho_hist.back();
                const double gamma = sy / std::max(yy, 1e-300);
                for (int c = 0; c < 3; ++c) {
                    double* dc = dir.comp[c].data();
                    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dir.comp[c].size());
#pragma omp parallel for schedule(static)
                    for (std::ptrdiff_t i = 0; i < n; ++i) dc[i] *= gamma;
                }
            }
            for (int i = 0; i < m; ++i) {
                const double beta = rho_hist[i] * field_dot(y_hist[i], dir);
                vf_axpy(dir, alpha[i] - beta, s_hist[i]);
            }
        }
        // descent direction is -dir
        double gd = -field_dot(g, dir);
        if (gd >= 0.0) {
            // curvature breakdown: fall back to steepest descent
            dir = g;
            gd = -field_dot(g, g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = o.initial_step;
        VectorField v_try = v;
        ObjectiveValue f_try;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            v_try = v;
            vf_axpy(v_try, -step, dir);
            f_try = eval_objective(p, v_try, lambda);
            if (f_try.finite && f_try.value <= fv.value + o.sufficient_decrease * step * gd) {
                accepted = true;
                break;
            }
            step *= o.backtrack;
        }
        if (!accepted) {
            out.status = MinimizeStatus::LineSearchFailure;
            return out;
        }

        VectorField g_new = grad_objective(p, v_try, lambda);
        VectorField s_vec = v_try;
        vf_axpy(s_vec, -1.0, v);
        VectorField y_vec = g_new;
        vf_axpy(y_vec, -1.0, g);
        const double sy = field_dot(s_vec, y_vec);
        if (sy > 1e-300) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > o.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        v = std::move(v_try);
        fv = f_try;
        g = std::move(g_new);
        gnorm = std::sqrt(field_dot(g, g));
    }
    out.gradient_norm = gnorm;
    out.objective = fv.value;
    out.max_det_err = fv.max_det_err;
    out.status = MinimizeStatus::MaxIterations;
    return out;
}

}  // namespace

std::pair<VectorField, MinimizeReport> minimize_nonlinear(const NonlinearProblem& p,
                                                          const VectorField& init) {
    if (!(init.domain == p.domain))
        throw std::invalid_argument("minimize_nonlinear: init domain mismatch");
    if (!init.satisfies_dirichlet(1e-9))
        throw std::invalid_argument("minimize_nonlinear: init violates the Dirichlet data");
    if (p.h <= 0.0 || p.weight <= 0.0)
        throw std::invalid_argument("minimize_nonlinear: need h > 0 and weight > 0");

    NonlinearProblem work = p;
    VectorField v = init;
    MinimizeReport rep;

    if (p.mode == ConstraintMode::Penalty) {
        const LbfgsOutcome o = lbfgs_minimize(work, v, nullptr, p.opts.gtol);
        rep.status = o.status;
        rep.outer_iterations = 1;
        rep.lbfgs_iterations = o.iterations;
        rep.gradient_norm = o.gradient_norm;
        rep.objective = o.objective;
        rep.max_det_err = o.max_det_err;
        rep.incompressible = incompressible_value(work, v);
        if (o.status == MinimizeStatus::LineSearchFailure)
            rep.message = "line search failed; returning the last iterate";
        return {std::move(v), rep};
    }

    // augmented Lagrangian outer loop
    std::vector<double> lambda(p.domain.node_count(), 0.0);
    double prev_max = std::numeric_limits<double>::infinity();
    for (int cycle = 0; cycle < p.opts.al_max_outer; ++cycle) {
        const LbfgsOutcome o = lbfgs_minimize(work, v, &lambda, p.opts.gtol);
        rep.outer_iterations = cycle + 1;
        rep.lbfgs_iterations += o.iterations;
        rep.gradient_norm = o.gradient_norm;
        rep.objective = o.objective;
        rep.max_det_err = o.max_det_err;
        if (o.status == MinimizeStatus::LineSearchFailure) {
            rep.status = o.status;
            rep.message = "line search failed during an AL cycle";
            rep.incompressible = incompressible_value(work, v);
            return {std::move(v), rep};
        }

        if (o.max_det_err <= p.det_tol) {
            rep.status = MinimizeStatus::Converged;
            break;
        }

        // multiplier update matching the penalty gradient, then escalate the
        // weight when the constraint is not contracting
        {
            const TensorField gv = gradient(v);
            const VolumetricModel pen{work.weight};
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(lambda.size());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t t = 0; t < n; ++t) {
                const std::size_t idx = static_cast<std::size_t>(t);
                const Matrix3 f = Matrix3::identity() + work.h * gv.at(idx);
                lambda[idx] += pen.deriv(f.det());
            }
        }
        if (o.max_det_err > 0.25 * prev_max) {
            if (work.weight >= p.opts.max_weight && o.max_det_err >= 0.9 * prev_max) {
                rep.status = MinimizeStatus::StalledConstraint;
                rep.message = "constraint stalled at the weight cap";
                rep.incompressible = incompressible_value(work, v);
                return {std::move(v), rep};
            }
            work.weight = std::min(work.weight * p.opts.weight_growth, p.opts.max_weight);
        }
        prev_max = o.max_det_err;
        if (cycle + 1 == p.opts.al_max_outer) rep.status = MinimizeStatus::MaxIterations;
    }

    if (rep.status == MinimizeStatus::Converged && p.opts.polish_gtol > 0.0 &&
        p.opts.polish_gtol < p.opts.gtol) {
        const LbfgsOutcome o = lbfgs_minimize(work, v, &lambda, p.opts.polish_gtol);
        rep.lbfgs_iterations += o.iterations;
        rep.gradient_norm = o.gradient_norm;
        rep.objective = o.objective;
        rep.max_det_err = o.max_det_err;
    }
    rep.incompressible = incompressible_value(work, v);
    return {std::move(v), rep};
}

// ------------------------------------------------------------------
// shifted functionals
// ------------------------------------------------------------------

ShiftedFunctionals::ShiftedFunctionals(const LinearizedProblem& base, VectorField vbar,
                                       double div_tol)
    : base_(base), vbar_(std::move(vbar)), sbar_(base.domain), div_tol_(div_tol) {
    if (!(vbar_.domain == base_.domain))
        throw std::invalid_argument("shifted_functionals: vbar domain mismatch");
    const ScalarField dv = divergence(vbar_);
    const double div_norm = quad_l2(base_.domain, [&](std::size_t i) {
        return dv.data[i] * dv.data[i];
    });
    const double scale = std::max(1.0, vec_quad_l2(vbar_));
    if (div_norm > div_tol * scale)
        throw std::invalid_argument("shifted_functionals: vbar is not divergence-free");

    const TensorField e = strain(vbar_);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(base_.domain.node_count());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::size_t idx = static_cast<std::size_t>(t);
        sbar_.set(idx, linear_stress(base_.tensor, e.at(idx)));
    }
    const double elastic = integrate(base_.domain, [&](std::size_t i) {
        return quadratic_form(base_.tensor, e.at(i));
    });
    gbar_offset_ = 0.5 * elastic - load_functional(base_.load, vbar_);
}

double ShiftedFunctionals::cross_term(const VectorField& v) const {
    const TensorField e = strain(v);
    return integrate(base_.domain,
                     [&](std::size_t i) { return sbar_.at(i).dot(e.at(i)); });
}

EnergyValue ShiftedFunctionals::gtilde(const VectorField& v) const {
    LinearizedProblem hom = base_;
    hom.boundary_data.reset();
    const EnergyValue g = linearized_energy(hom, v, div_tol_);
    if (!g.finite) return g;
    return EnergyValue::of(g.value + cross_term(v) + gbar_offset_);
}

EnergyValue ShiftedFunctionals::gbar(const VectorField& v) const {
    LinearizedProblem inhom = base_;
    inhom.boundary_data = vbar_;
    return linearized_energy(inhom, v, div_tol_);
}

NonlinearEnergyReport ShiftedFunctionals::gtilde_h(const NonlinearProblem& base,
                                                   const VectorField& v) const {
    NonlinearProblem shifted = base;
    shifted.cross_stress = sbar_;
    shifted.energy_offset = base.energy_offset + gbar_offset_;
    return nonlinear_energy(shifted, v);
}

}  // namespace incompressa
