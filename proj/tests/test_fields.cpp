#include "doctest.h"

#include <cstdio>
#include <random>
#include <stdexcept>

#include "incompressa/fields.hpp"
#include "support.hpp"

using namespace incompressa;
using namespace testsupport;

namespace {

// C2 bump supported on [0,1]^3: per-axis (1-t^2)^3 in centered coordinates.
double bump1(double x) {
    const double t = 2.0 * x - 1.0;
    const double s = 1.0 - t * t;
    return s > 0.0 ? s * s * s : 0.0;
}
double bump(const Vec3& p) { return bump1(p.x) * bump1(p.y) * bump1(p.z); }

}  // namespace

TEST_CASE("domain validation") {
    CHECK_THROWS_AS(BoxDomain(1, 1, 1, 2, 3, 3, GammaMarker::none()), std::invalid_argument);
    CHECK_THROWS_AS(BoxDomain(-1, 1, 1, 3, 3, 3, GammaMarker::none()), std::invalid_argument);
    const BoxDomain d = BoxDomain::unit(5, GammaMarker::full_boundary());
    CHECK(d.spacing(0) == doctest::Approx(0.25));
    const BoxDomain p = BoxDomain::unit(8, GammaMarker::periodic());
    CHECK(p.spacing(0) == doctest::Approx(0.125));
    CHECK(p.periodic());
    CHECK(!p.on_gamma(0, 0, 0));
}

TEST_CASE("gamma node marking") {
    const BoxDomain d = BoxDomain::unit(4, GammaMarker::face(1, 1));
    CHECK(d.on_gamma(2, 3, 1));
    CHECK(!d.on_gamma(2, 0, 1));
    const BoxDomain f = BoxDomain::unit(4, GammaMarker::full_boundary());
    CHECK(f.on_gamma(0, 2, 2));
    CHECK(!f.on_gamma(1, 2, 2));
}

TEST_CASE("gradient exact on affine fields") {
    const BoxDomain d = BoxDomain::unit(9, GammaMarker::none());
    VectorField v(d);
    v.fill([](const Vec3& p) { return Vec3{p.y, 0.0, 0.0}; });
    const TensorField g = gradient(v);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx) {
        const Matrix3 m = g.at(idx);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(m(r, c) - (r == 0 && c == 1 ? 1.0 : 0.0)) <= 1e-14);
    }

    std::mt19937_64 rng(5);
    Matrix3 a;
    for (double& x : a.a) x = uniform(rng, -2, 2);
    VectorField w(d);
    w.fill([&](const Vec3& p) { return a * p + Vec3{0.3, -0.7, 0.1}; });
    const TensorField gw = gradient(w);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx)
        CHECK((gw.at(idx) - a).norm() <= 1e-13);

    VectorField c(d);
    c.fill([](const Vec3&) { return Vec3{1.0, 2.0, 3.0}; });
    const TensorField gc = gradient(c);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx) CHECK(gc.at(idx).norm() <= 1e-14);
}

TEST_CASE("gradient second-order convergence") {
    std::vector<double> hs, errs;
    for (int n : {17, 33, 65}) {
        const BoxDomain d = BoxDomain::unit(n, GammaMarker::none());
        VectorField v(d);
        v.fill([](const Vec3& p) { return Vec3{std::sin(p.y), 0.0, 0.0}; });
        const TensorField g = gradient(v);
        double err = 0.0;
        for (int k = 0; k < d.nz; ++k)
            for (int j = 0; j < d.ny; ++j)
                for (int i = 0; i < d.nx; ++i) {
                    const double exact = std::cos(d.node(i, j, k).y);
                    err = std::max(err, std::abs(g.at(i, j, k)(0, 1) - exact));
                }
        hs.push_back(d.spacing(1));
        errs.push_back(err);
    }
    CHECK(loglog_slope(hs, errs) >= 1.9);
}

TEST_CASE("divergence, curl, strain on canonical fields") {
    const BoxDomain d = BoxDomain::unit(7, GammaMarker::none());
    VectorField vid(d);
    vid.fill([](const Vec3& p) { return p; });
    const ScalarField dv = divergence(vid);
    for (double x : dv.data) CHECK(x == doctest::Approx(3.0).epsilon(1e-13));

    VectorField rot(d);
    rot.fill([](const Vec3& p) { return Vec3{-p.y, p.x, 0.0}; });
    const VectorField c = curl(rot);
    const TensorField e = strain(rot);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx) {
        CHECK((c.at(idx) - Vec3{0, 0, 2}).norm() <= 1e-13);
        CHECK(e.at(idx).norm() <= 1e-13);
    }

    VectorField shear(d);
    shear.fill([](const Vec3& p) { return Vec3{p.y, 0.0, 0.0}; });
    const TensorField es = strain(shear);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx) {
        const Matrix3 m = es.at(idx);
        CHECK(m(0, 1) == doctest::Approx(0.5).epsilon(1e-13));
        CHECK(m(1, 0) == doctest::Approx(0.5).epsilon(1e-13));
        CHECK(std::abs(m(0, 0)) <= 1e-14);
        CHECK(std::abs(m(2, 2)) <= 1e-14);
    }
}

TEST_CASE("strain is symmetric by construction") {
    const BoxDomain d = BoxDomain::unit(9, GammaMarker::none());
    VectorField v(d);
    std::mt19937_64 rng(17);
    v.fill([&](const Vec3& p) {
        return Vec3{std::sin(3 * p.x) * p.y, std::cos(2 * p.y) + p.z * p.z, p.x * p.y * p.z};
    });
    const TensorField e = strain(v);
    for (std::size_t idx = 0; idx < d.node_count(); ++idx) {
        const Matrix3 m = e.at(idx);
        CHECK(m(0, 1) == m(1, 0));
        CHECK(m(0, 2) == m(2, 0));
        CHECK(m(1, 2) == m(2, 1));
    }
}

TEST_CASE("div of curl vanishes to rounding") {
    // Axis difference operators commute exactly on the tensor-product grid,
    // so div(curl w) is zero up to floating-point noise.
    const BoxDomain d = BoxDomain::unit(17, GammaMarker::none());
    VectorField w(d);
    w.fill([](const Vec3& p) {
        return Vec3{bump(p), bump(p) * p.x, std::sin(p.x + 2 * p.y - p.z)};
    });
    const ScalarField dc = divergence(curl(w));
    CHECK(lp_norm(dc, 2.0) <= 1e-12);
}

TEST_CASE("quadrature") {
    const BoxDomain d = BoxDomain::unit(9, GammaMarker::none());
    ScalarField one(d);
    one.fill([](const Vec3&) { return 1.0; });
    CHECK(integrate(one) == doctest::Approx(1.0).epsilon(1e-14));

    ScalarField zero(d);
    CHECK(integrate(zero) == 0.0);

    const BoxDomain d65 = BoxDomain::unit(65, GammaMarker::none());
    ScalarField s2(d65);
    s2.fill([](const Vec3& p) {
        const double s = std::sin(M_PI * p.x);
        return s * s;
    });
    CHECK(integrate(s2) == doctest::Approx(0.5).epsilon(1e-6));

    // periodic rectangle rule integrates trig polynomials exactly
    const BoxDomain dp = BoxDomain::unit(16, GammaMarker::periodic());
    ScalarField sp(dp);
    sp.fill([](const Vec3& p) {
        const double s = std::sin(2 * M_PI * p.x);
        return s * s;
    });
    CHECK(integrate(sp) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("w1p norms") {
    const BoxDomain d = BoxDomain::unit(9, GammaMarker::none());
    VectorField z(d);
    CHECK(w1p_norm(z, 2.0) == 0.0);

    VectorField c(d);
    c.fill([](const Vec3&) { return Vec3{1, 0, 0}; });
    CHECK(w1p_norm(c, 2.0) == doctest::Approx(1.0).epsilon(1e-12));

    // refinement oracle for p = 1.5
    auto field = [](const Vec3& p) {
        return Vec3{std::sin(2 * p.x + p.y), std::cos(p.z), p.x * p.y};
    };
    VectorField coarse(BoxDomain::unit(17, GammaMarker::none()));
    coarse.fill(field);
    VectorField fine(BoxDomain::unit(65, GammaMarker::none()));
    fine.fill(field);
    const double nc = w1p_norm(coarse, 1.5), nf = w1p_norm(fine, 1.5);
    CHECK(std::abs(nc - nf) <= 0.01 * nf);
}

TEST_CASE("w1p norm dominates sub-box restriction") {
    auto field = [](const Vec3& p) {
        return Vec3{std::sin(2 * p.x + p.y), std::cos(p.z), p.x * p.y};
    };
    const int n = 17;
    VectorField full(BoxDomain::unit(n, GammaMarker::none()));
    full.fill(field);
    // restriction to the sub-box spanned by nodes [2, 10]^3 (same spacing)
    const int lo = 2, hi = 10, m = hi - lo + 1;
    const double ext = double(hi - lo) / double(n - 1);
    VectorField sub(BoxDomain(ext, ext, ext, m, m, m, GammaMarker::none()));
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
                sub.set(sub.domain.index(i, j, k), full.at(i + lo, j + lo, k + lo));
    CHECK(w1p_norm(full, 2.0) >= w1p_norm(sub, 2.0) - 1e-12);
}

TEST_CASE("grisvard identity") {
    VectorField z(BoxDomain::unit(9, GammaMarker::full_boundary()));
    const GrisvardCheck zc = grisvard_identity_check(z);
    CHECK(zc.lhs == 0.0);
    CHECK(zc.rhs == 0.0);
    CHECK(zc.gap == 0.0);

    // The centered difference operators make the identity discretely exact
    // for boundary-vanishing fields, so the gap sits at the rounding floor
    // on every refinement level (well inside any C h^2 envelope).
    auto rot_bump = [](const Vec3& p) {
        const double b = bump(p);
        return Vec3{-p.y * b, p.x * b, 0.0};
    };
    for (int n : {17, 33, 65}) {
        VectorField zeta(BoxDomain::unit(n, GammaMarker::full_boundary()));
        zeta.fill(rot_bump);
        const GrisvardCheck c = grisvard_identity_check(zeta);
        CHECK(c.gap <= 1e-12 * std::max(1.0, c.lhs));
    }

    // exactness is structural, not field-specific: random interior data
    {
        std::mt19937_64 rng(97);
        const BoxDomain d = BoxDomain::unit(13, GammaMarker::full_boundary());
        VectorField zeta(d);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < d.nz - 1; ++k)
                for (int j = 1; j < d.ny - 1; ++j)
                    for (int i = 1; i < d.nx - 1; ++i)
                        zeta.comp[c][d.index(i, j, k)] = uniform(rng, -1, 1);
        const GrisvardCheck c = grisvard_identity_check(zeta);
        CHECK(c.gap <= 1e-12 * c.lhs);
    }

    // gradient field: curl part below discretization error, identity holds
    VectorField grad_phi(BoxDomain::unit(33, GammaMarker::full_boundary()));
    grad_phi.fill([](const Vec3& p) {
        const double e = 1e-6;
        auto phi = [](const Vec3& q) { return bump(q); };
        return Vec3{(phi({p.x + e, p.y, p.z}) - phi({p.x - e, p.y, p.z})) / (2 * e),
                    (phi({p.x, p.y + e, p.z}) - phi({p.x, p.y - e, p.z})) / (2 * e),
                    (phi({p.x, p.y, p.z + e}) - phi({p.x, p.y, p.z - e})) / (2 * e)};
    });
    const GrisvardCheck gc = grisvard_identity_check(grad_phi, 1e-6);
    const VectorField cg = curl(grad_phi);
    double curl_part = 0.0;
    for (int c = 0; c < 3; ++c)
        for (double x : cg.comp[c])
            curl_part = std::max(curl_part, std::abs(x));
    CHECK(curl_part <= 5e-2 * std::sqrt(gc.lhs));
    CHECK(gc.gap <= 0.05 * gc.lhs);

    VectorField bad(BoxDomain::unit(9, GammaMarker::full_boundary()));
    bad.fill([](const Vec3&) { return Vec3{1, 0, 0}; });
    CHECK_THROWS_AS(grisvard_identity_check(bad), std::invalid_argument);
}

TEST_CASE("dirichlet predicate") {
    const BoxDomain d = BoxDomain::unit(7, GammaMarker::face(0, 0));
    VectorField v(d);
    v.fill([](const Vec3& p) { return Vec3{p.x, 0, 0}; });
    CHECK(v.satisfies_dirichlet(1e-12));
    VectorField w(d);
    w.fill([](const Vec3& p) { return Vec3{p.x + 1.0, 0, 0}; });
    CHECK(!w.satisfies_dirichlet(1e-12));
    CHECK(w.satisfies_dirichlet(w, 1e-15));
}

TEST_CASE("gradient adjoint is the exact transpose") {
    // <G v, s> = <v, G^T s> for random fields, both periodic and bounded.
    std::mt19937_64 rng(23);
    for (GammaMarker g : {GammaMarker::none(), GammaMarker::periodic()}) {
        const BoxDomain d(1.0, 0.7, 1.3, 6, 7, 5, g);
        VectorField v(d);
        for (int c = 0; c < 3; ++c)
            for (double& x : v.comp[c]) x = uniform(rng, -1, 1);
        TensorField s(d);
        for (int c = 0; c < 9; ++c)
            for (double& x : s.comp[c]) x = uniform(rng, -1, 1);
        const TensorField gv = gradient(v);
        const VectorField gts = gradient_adjoint(s);
        double lhs = 0.0, rhs = 0.0;
        for (int c = 0; c < 9; ++c)
            for (std::size_t i = 0; i < d.node_count(); ++i)
                lhs += gv.comp[c][i] * s.comp[c][i];
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < d.node_count(); ++i)
                rhs += v.comp[c][i] * gts.comp[c][i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("serial reference matches parallel kernels") {
    const BoxDomain d = BoxDomain::unit(17, GammaMarker::none());
    VectorField v(d);
    v.fill([](const Vec3& p) {
        return Vec3{std::sin(p.x + 2 * p.y), p.z * p.x, std::cos(3 * p.z)};
    });
    const TensorField gp = gradient(v);
    const TensorField gs = serial::gradient(v);
    for (int c = 0; c < 9; ++c)
        for (std::size_t i = 0; i < d.node_count(); ++i)
            CHECK(gp.comp[c][i] == gs.comp[c][i]);  // bitwise: same arithmetic

    ScalarField f(d);
    f.fill([](const Vec3& p) { return std::exp(p.x - p.y * p.z); });
    CHECK(integrate(f) == doctest::Approx(serial::integrate(f)).epsilon(1e-14));
}

TEST_CASE("field serialization round trip") {
    const BoxDomain d(1.5, 1.0, 0.5, 5, 6, 7, GammaMarker::face(2, 1));
    VectorField v(d);
    std::mt19937_64 rng(29);
    for (int c = 0; c < 3; ++c)
        for (double& x : v.comp[c]) x = uniform(rng, -1, 1);
    const std::string path = "roundtrip_test_field.bin";
    save_vector_field(path, v);
    const VectorField w = load_vector_field(path);
    CHECK(w.domain == d);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < d.node_count(); ++i) CHECK(w.comp[c][i] == v.comp[c][i]);
    std::remove(path.c_str());

    ScalarField s(d);
    for (double& x : s.data) x = uniform(rng, -1, 1);
    save_scalar_field(path, s);
    const ScalarField t = load_scalar_field(path);
    for (std::size_t i = 0; i < d.node_count(); ++i) CHECK(t.data[i] == s.data[i]);
    std::remove(path.c_str());
    CHECK_THROWS(load_vector_field("definitely_missing_file.bin"));
}
