#include "incompressa/flow.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

#include "incompressa/parallel.hpp"

namespace incompressa {

double max_sampled_divergence(const AnalyticVelocity& v, const Vec3& lo, const Vec3& hi,
                              int samples, unsigned long long seed) {
    uint64_t s = seed ? seed : 1;
    auto next01 = [&s]() {
        uint64_t z = (s += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return ((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
    };
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Vec3 p{lo.x + (hi.x - lo.x) * next01(), lo.y + (hi.y - lo.y) * next01(),
                     lo.z + (hi.z - lo.z) * next01()};
        worst = std::max(worst, std::abs(v.jacobian(p).trace()));
    }
    return worst;
}

FlowState integrate_flow(const AnalyticVelocity& v, const Vec3& x, double h, int steps) {
    if (h <= 0.0) throw std::invalid_argument("integrate_flow: h must be positive");
    if (steps < 1) throw std::invalid_argument("integrate_flow: steps must be >= 1");

    const double dt = h / steps;
    Vec3 y = x;
    Matrix3 z = Matrix3::identity();

    auto rhs = [&v](const Vec3& yy, const Matrix3& zz, Vec3& ky, Matrix3& kz) {
        if (!v.inside(yy)) throw std::domain_error("trajectory left the declared domain");
        ky = v.value(yy);
        kz = v.jacobian(yy) * zz;
    };

    for (int s = 0; s < steps; ++s) {
        Vec3 k1y, k2y, k3y, k4y;
        Matrix3 k1z, k2z, k3z, k4z;
        rhs(y, z, k1y, k1z);
        rhs(y + (0.5 * dt) * k1y, z + (0.5 * dt) * k1z, k2y, k2z);
        rhs(y + (0.5 * dt) * k2y, z + (0.5 * dt) * k2z, k3y, k3z);
        rhs(y + dt * k3y, z + dt * k3z, k4y, k4z);
        y += (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        z += (dt / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    }
    return {y, z, h};
}

namespace {

RecoveryResult recover_impl(const AnalyticVelocity& v, double h, const BoxDomain& domain,
                            int steps, bool parallel) {
    RecoveryResult res;
    res.h = h;
    res.steps = steps;
    res.vh = VectorField(domain);

    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(domain.node_count());
    TensorField zfield(domain);
    std::vector<std::size_t> failed_nodes;

    auto body = [&](std::ptrdiff_t t) {
        const std::size_t idx = static_cast<std::size_t>(t);
        int i, j, k;
        domain.decompose(idx, i, j, k);
        const Vec3 x = domain.node(i, j, k);
        try {
            const FlowState st = integrate_flow(v, x, h, steps);
            res.vh.set(idx, (st.y - x) * (1.0 / h));
            zfield.set(idx, st.z);
        } catch (const std::domain_error&) {
#pragma omp critical
            failed_nodes.push_back(idx);
        }
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t t = 0; t < n; ++t) body(t);
    } else {
        for (std::ptrdiff_t t = 0; t < n; ++t) body(t);
    }

    if (!failed_nodes.empty()) {
        std::size_t worst = failed_nodes.front();
        for (std::size_t f : failed_nodes) worst = std::min(worst, f);
        int i, j, k;
        domain.decompose(worst, i, j, k);
        std::ostringstream msg;
        msg << "recover: trajectory from node (" << i << ", " << j << ", " << k
            << ") left the declared velocity domain";
        throw std::runtime_error(msg.str());
    }

    res.max_det_err_integrated = chunked_max(n, [&](std::ptrdiff_t t) {
        return std::abs(zfield.at(static_cast<std::size_t>(t)).det() - 1.0);
    });
    res.sup_h_grad = chunked_max(n, [&](std::ptrdiff_t t) {
        return (zfield.at(static_cast<std::size_t>(t)) - Matrix3::identity()).norm();
    });

    const TensorField gh = gradient(res.vh);
    res.max_det_err_discrete = chunked_max(n, [&](std::ptrdiff_t t) {
        const Matrix3 f = Matrix3::identity() + h * gh.at(static_cast<std::size_t>(t));
        return std::abs(f.det() - 1.0);
    });

    // discrete W^{1,2} distance to the exact field, integrated gradients
    const double dist2 = integrate(domain, [&](std::size_t idx) {
        int i, j, k;
        domain.decompose(idx, i, j, k);
        const Vec3 x = domain.node(i, j, k);
        const Vec3 ev = res.vh.at(idx) - v.value(x);
        const Matrix3 gv_h = (1.0 / h) * (zfield.at(idx) - Matrix3::identity());
        const Matrix3 eg = gv_h - v.jacobian(x);
        return ev.dot(ev) + eg.dot(eg);
    });
    res.dist_w12 = std::sqrt(std::max(0.0, dist2));

    if (v.zero_set.kind == GammaMarker::Kind::FullBoundary ||
        v.zero_set.kind == GammaMarker::Kind::Face) {
        res.gamma_applicable = true;
        BoxDomain marked = domain;
        marked.gamma = v.zero_set;
        double worst = 0.0;
        for (int k = 0; k < domain.nz; ++k)
            for (int j = 0; j < domain.ny; ++j)
                for (int i = 0; i < domain.nx; ++i) {
                    if (!marked.on_gamma(i, j, k)) continue;
                    const Vec3 val = res.vh.at(i, j, k);
                    worst = std::max({worst, std::abs(val.x), std::abs(val.y), std::abs(val.z)});
                }
        res.gamma_max_violation = worst;
    }
    return res;
}

}  // namespace

RecoveryResult recover(const AnalyticVelocity& v, double h, const BoxDomain& domain, int steps) {
    return recover_impl(v, h, domain, steps, true);
}

std::vector<RecoveryResult> recovery_sweep(const AnalyticVelocity& v,
                                           const std::vector<double>& h_list,
                                           const BoxDomain& domain, int steps) {
    std::vector<RecoveryResult> out;
    out.reserve(h_list.size());
    for (double h : h_list) out.push_back(recover(v, h, domain, steps));
    return out;
}

AnalyticVelocity velocity_zero() {
    AnalyticVelocity v;
    v.name = "zero";
    v.value = [](const Vec3&) { return Vec3{}; };
    v.jacobian = [](const Vec3&) { return Matrix3::zero(); };
    v.divergence_free = true;
    v.zero_set = GammaMarker::full_boundary();
    return v;
}

AnalyticVelocity velocity_rigid(const Vec3& omega) {
    AnalyticVelocity v;
    v.name = "rigid";
    Matrix3 w;  // cross-product matrix
    w(0, 1) = -omega.z; w(0, 2) = omega.y;
    w(1, 0) = omega.z;  w(1, 2) = -omega.x;
    w(2, 0) = -omega.y; w(2, 1) = omega.x;
    v.value = [omega](const Vec3& x) { return omega.cross(x); };
    v.jacobian = [w](const Vec3&) { return w; };
    v.divergence_free = true;
    return v;
}

AnalyticVelocity velocity_shear(int i, int j) {
    if (i == j || i < 0 || i > 2 || j < 0 || j > 2)
        throw std::invalid_argument("velocity_shear: need a distinct axis pair");
    AnalyticVelocity v;
    v.name = "shear";
    v.value = [i, j](const Vec3& x) {
        Vec3 out;
        out[i] = x[j];
        return out;
    };
    Matrix3 g;
    g(i, j) = 1.0;
    v.jacobian = [g](const Vec3&) { return g; };
    v.divergence_free = true;
    return v;
}

AnalyticVelocity velocity_abc(double a, double b, double c) {
    AnalyticVelocity v;
    v.name = "abc";
    v.value = [a, b, c](const Vec3& x) {
        return Vec3{a * std::sin(x.z) + c * std::cos(x.y),
                    b * std::sin(x.x) + a * std::cos(x.z),
                    c * std::sin(x.y) + b * std::cos(x.x)};
    };
    v.jacobian = [a, b, c](const Vec3& x) {
        Matrix3 g;
        g(0, 1) = -c * std::sin(x.y);
        g(0, 2) = a * std::cos(x.z);
        g(1, 0) = b * std::cos(x.x);
        g(1, 2) = -a * std::sin(x.z);
        g(2, 0) = -b * std::sin(x.x);
        g(2, 1) = c * std::cos(x.y);
        return g;
    };
    v.divergence_free = true;
    return v;
}

namespace serial {

RecoveryResult recover(const AnalyticVelocity& v, double h, const BoxDomain& domain, int steps) {
    return recover_impl(v, h, domain, steps, false);
}

}  // namespace serial

}  // namespace incompressa
