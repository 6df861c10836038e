#include "doctest.h"

#include <random>
#include <stdexcept>

#include "incompressa/materials.hpp"
#include "support.hpp"

using namespace incompressa;
using namespace testsupport;

namespace {

const MaterialModel kNeo = MaterialModel::neo_hookean(1.0);
const VolumetricModel kVol{1.0};

// Independent central-difference derivative of the energy.
Matrix3 fd_stress(const MaterialModel& m, const VolumetricModel& vol, const Matrix3& f,
                  double step) {
    Matrix3 g;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Matrix3 fp = f, fm = f;
            fp(i, j) += step;
            fm(i, j) -= step;
            g(i, j) = (energy(m, vol, fp).value - energy(m, vol, fm).value) / (2.0 * step);
        }
    return g;
}

}  // namespace

TEST_CASE("energy values") {
    CHECK(energy(kNeo, kVol, Matrix3::identity()).value == 0.0);
    CHECK(energy(kNeo, kVol, Matrix3::identity()).is_finite());

    // det = 1 so the volumetric part vanishes; Tr(F^T F) = 4 + 0.25 + 1.
    const EnergyValue w = energy(kNeo, kVol, Matrix3::diagonal(2.0, 0.5, 1.0));
    CHECK(w.is_finite());
    CHECK(w.value == doctest::Approx(2.25).epsilon(1e-14));

    CHECK(!energy(kNeo, kVol, Matrix3::diagonal(1, 1, -1)).is_finite());
    CHECK(!energy(MaterialModel::yeoh(1, 1, 1), kVol, Matrix3::diagonal(1, 1, -1)).is_finite());
}

TEST_CASE("incompressible energy") {
    CHECK(incompressible_energy(kNeo, kVol, Matrix3::identity(), 0.0).value == 0.0);
    CHECK(!incompressible_energy(kNeo, kVol, Matrix3::diagonal(2, 2, 2), 1e-8).is_finite());
    const EnergyValue w = incompressible_energy(kNeo, kVol, Matrix3::diagonal(2, 0.5, 1), 1e-8);
    CHECK(w.value == doctest::Approx(2.25).epsilon(1e-14));
}

TEST_CASE("stress vanishes on rotations") {
    std::mt19937_64 rng(21);
    const MaterialModel models[] = {kNeo, MaterialModel::mooney_rivlin(1.0, -0.5),
                                    MaterialModel::ogden({1.0, 0.4}, {1.3, 1.7}),
                                    MaterialModel::yeoh(1.0, 0.3, 0.1)};
    for (const auto& m : models) {
        CHECK(stress(m, kVol, Matrix3::identity()).norm() == doctest::Approx(0.0).epsilon(1e-12));
        for (int i = 0; i < 20; ++i) {
            CHECK(stress(m, kVol, random_rotation(rng)).norm() <= 1e-10);
        }
    }
    CHECK_THROWS_AS(stress(kNeo, kVol, Matrix3::diagonal(1, 1, -1)), std::domain_error);
}

TEST_CASE("stress matches finite differences") {
    const Matrix3 f_small = Matrix3::identity() + 0.01 * Matrix3::outer({1, 0, 0}, {0, 1, 0});
    const Matrix3 s = stress(kNeo, kVol, f_small);
    const Matrix3 fd = fd_stress(kNeo, kVol, f_small, 1e-5);
    CHECK((s - fd).norm() <= 1e-6 * std::max(1.0, s.norm()));

    std::mt19937_64 rng(31);
    const MaterialModel models[] = {kNeo, MaterialModel::mooney_rivlin(1.0, -0.5),
                                    MaterialModel::ogden({1.0}, {1.5}),
                                    MaterialModel::yeoh(1.0, 0.3, 0.1)};
    for (const auto& m : models) {
        for (int i = 0; i < 10; ++i) {
            const Matrix3 f = random_matrix_with_det(rng, 0.5, 2.0);
            const Matrix3 a = stress(m, kVol, f);
            const Matrix3 fd2 = fd_stress(m, kVol, f, 1e-6);
            CHECK((a - fd2).norm() <= 2e-5 * std::max(1.0, a.norm()));
        }
    }
}

TEST_CASE("isochoric stress is tangent to volume scaling") {
    // The isochoric part satisfies DW_iso(F) : F = 0; with the volumetric
    // part removed (c -> 0) the full stress contracts to zero against F.
    std::mt19937_64 rng(41);
    const VolumetricModel vol0{1e-30};
    for (int i = 0; i < 10; ++i) {
        const Matrix3 f = random_matrix_with_det(rng, 0.5, 2.0);
        const Matrix3 s = stress(MaterialModel::ogden({1.0, 0.4}, {1.3, 1.7}), vol0, f);
        CHECK(std::abs(s.dot(f)) <= 1e-10 * std::max(1.0, s.norm() * f.norm()));
    }
}

TEST_CASE("hessian at identity") {
    const ElasticityTensor h = hessian_at_identity(kNeo, kVol);
    CHECK(h.is_symmetric());

    // FD second-difference oracle for the quadratic form in direction B.
    auto fd_q = [&](const MaterialModel& m, const Matrix3& b) {
        const double s = 1e-3;
        auto phi = [&](double t) {
            return energy(m, kVol, Matrix3::identity() + t * b).value;
        };
        return (phi(s) + phi(-s)) / (s * s);
    };
    const Matrix3 b12 = Matrix3::outer({1, 0, 0}, {0, 1, 0});
    CHECK(quadratic_form(h, b12) == doctest::Approx(fd_q(kNeo, b12)).epsilon(1e-6));
    CHECK(quadratic_form(h, b12) == doctest::Approx(2.0).epsilon(1e-12));  // 4 mu |sym B|^2

    CHECK(quadratic_form(h, Matrix3::zero()) == 0.0);
    // skew direction contributes nothing
    Matrix3 skew;
    skew(0, 1) = 1.0;
    skew(1, 0) = -1.0;
    CHECK(quadratic_form(h, skew) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(quadratic_form(h, b12) ==
          doctest::Approx(quadratic_form(h, b12.transpose())).epsilon(1e-14));

    // Dense contraction oracle at B = I: sum of the upper-left 3x3 block.
    double dense = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) dense += h(i, j);
    CHECK(quadratic_form(h, Matrix3::identity()) == doctest::Approx(dense).epsilon(1e-13));

    // Ellipticity: smallest eigenvalue strictly positive (recorded, not pinned).
    CHECK(h.min_eigenvalue() > 0.0);
    MESSAGE("NeoHookean(mu=1,c=1) lambda_min = ", h.min_eigenvalue());
}

TEST_CASE("finite-difference hessians agree with closed forms") {
    // Yeoh linearizes like NeoHookean with mu = c1 near the identity; the
    // FD path must reproduce the analytic NeoHookean array.
    const ElasticityTensor hy = hessian_at_identity(MaterialModel::yeoh(1.0, 0.7, 0.4), kVol);
    const ElasticityTensor hn = hessian_at_identity(kNeo, kVol);
    for (int i = 0; i < 36; ++i) CHECK(hy.a[i] == doctest::Approx(hn.a[i]).epsilon(5e-7));

    // Ogden with (2 mu, 2) is NeoHookean(mu) exactly.
    const ElasticityTensor ho = hessian_at_identity(MaterialModel::ogden({2.0}, {2.0}), kVol);
    for (int i = 0; i < 36; ++i) CHECK(ho.a[i] == doctest::Approx(hn.a[i]).epsilon(5e-7));
}

TEST_CASE("volumetric invariance on trace-free directions") {
    std::mt19937_64 rng(51);
    const MaterialModel models[] = {kNeo, MaterialModel::mooney_rivlin(1.0, -0.5),
                                    MaterialModel::yeoh(1.0, 0.3, 0.1)};
    for (const auto& m : models) {
        const ElasticityTensor h1 = hessian_at_identity(m, VolumetricModel{1.0});
        const ElasticityTensor h10 = hessian_at_identity(m, VolumetricModel{10.0});
        for (int i = 0; i < 30; ++i) {
            const Matrix3 b = random_tracefree_symmetric(rng);
            CHECK(std::abs(quadratic_form(h1, b) - quadratic_form(h10, b)) <= 1e-9);
        }
    }
}

TEST_CASE("coercivity gauge") {
    CHECK(coercivity_gauge(1.5, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(coercivity_gauge(2.0, 3.0) == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(coercivity_gauge(1.5, 2.0) == doctest::Approx(3.4379028329949206).epsilon(1e-13));
    CHECK_THROWS_AS(coercivity_gauge(1.5, -0.1), std::domain_error);
    CHECK_THROWS_AS(coercivity_gauge(1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(coercivity_gauge(2.5, 1.0), std::domain_error);

    // midpoint convexity on a grid
    for (double p : {1.2, 1.5, 1.8, 2.0}) {
        for (double s = 0.0; s <= 4.0; s += 0.25) {
            for (double t = s; t <= 4.0; t += 0.25) {
                const double mid = coercivity_gauge(p, 0.5 * (s + t));
                const double avg = 0.5 * (coercivity_gauge(p, s) + coercivity_gauge(p, t));
                CHECK(mid <= avg + 1e-12);
            }
        }
    }
}

TEST_CASE("coercivity check") {
    std::mt19937_64 rng(61);
    CoercivityProfile prof{1.8, 0.01};

    CHECK(coercivity_check(kNeo, kVol, prof, {Matrix3::identity()}).min_margin ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(coercivity_check(kNeo, kVol, prof, {random_rotation(rng)}).min_margin ==
          doctest::Approx(0.0).epsilon(1e-10));

    std::vector<Matrix3> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back(random_matrix_with_det(rng, 0.5, 2.0));
    const CoercivityReport rep = coercivity_check(kNeo, kVol, prof, samples);
    CHECK(rep.violations == 0);
    CHECK(rep.min_margin >= 0.0);
}

TEST_CASE("frame indifference") {
    CHECK(frame_indifference_gap(kNeo, kVol, Matrix3::identity(), Matrix3::identity()) == 0.0);

    std::mt19937_64 rng(71);
    const MaterialModel models[] = {kNeo, MaterialModel::mooney_rivlin(1.0, -0.5),
                                    MaterialModel::ogden({1.0, 0.4}, {1.3, 1.7}),
                                    MaterialModel::yeoh(1.0, 1.0, 1.0)};
    for (const auto& m : models) {
        for (int i = 0; i < 100; ++i) {
            const Matrix3 f = random_matrix_with_det(rng, 0.2, 5.0);
            const Matrix3 r = random_rotation(rng);
            CHECK(frame_indifference_gap(m, kVol, f, r) <= 1e-10);
        }
    }

    const Matrix3 rz = rotation_about_axis({0, 0, 1}, M_PI / 3.0);
    CHECK(frame_indifference_gap(MaterialModel::yeoh(1, 1, 1), kVol,
                                 Matrix3::diagonal(2, 0.5, 1), rz) <= 1e-10);
    CHECK_THROWS_AS(frame_indifference_gap(kNeo, kVol, Matrix3::identity(),
                                           Matrix3::diagonal(1, 1, 2)),
                    std::invalid_argument);
}

TEST_CASE("energy is nonnegative where finite") {
    std::mt19937_64 rng(81);
    const MaterialModel models[] = {kNeo, MaterialModel::ogden({1.0, 0.4}, {1.3, 1.7}),
                                    MaterialModel::yeoh(1.0, 0.3, 0.1)};
    for (const auto& m : models) {
        for (int i = 0; i < 200; ++i) {
            const EnergyValue w = energy(m, kVol, random_matrix_with_det(rng, 0.2, 5.0));
            CHECK(w.value >= -1e-13);
        }
    }
}

TEST_CASE("Ogden reductions") {
    std::mt19937_64 rng(91);
    const double mu = 0.8;
    const MaterialModel neo = MaterialModel::neo_hookean(mu);
    const MaterialModel og1 = MaterialModel::ogden({2.0 * mu}, {2.0});
    const MaterialModel mr = MaterialModel::mooney_rivlin(1.0, -0.5);
    const MaterialModel og2 = MaterialModel::ogden({1.0, -0.5}, {2.0, -2.0});
    for (int i = 0; i < 100; ++i) {
        const Matrix3 f = random_matrix_with_det(rng, 0.999999999, 1.000000001);
        CHECK(std::abs(energy(neo, kVol, f).value - energy(og1, kVol, f).value) <= 1e-12);
        CHECK(std::abs(energy(mr, kVol, f).value - energy(og2, kVol, f).value) <= 1e-12);
    }
}

TEST_CASE("sub-quadratic Ogden growth") {
    const MaterialModel og = MaterialModel::ogden({1.0}, {1.5});
    std::vector<double> dist, w;
    for (double lam = 10.0; lam <= 1000.0; lam *= 1.5) {
        const Matrix3 f = Matrix3::diagonal(1.0 / (lam * lam), lam, lam);
        dist.push_back(distance_to_rotations(f));
        w.push_back(energy(og, kVol, f).value);
    }
    const double slope = loglog_slope(dist, w);
    CHECK(slope < 2.0);
    CHECK(slope > 1.0);
}

TEST_CASE("volumetric model basics") {
    const VolumetricModel v{2.0};
    CHECK(v.value(1.0) == 0.0);
    CHECK(v.deriv(1.0) == 0.0);
    for (double t : {0.1, 0.5, 0.9, 1.1, 2.0, 10.0}) CHECK(v.value(t) > 0.0);
}

TEST_CASE("material config parsing") {
    auto [m1, v1] = material_from_config(
        {{"model", "neo_hookean"}, {"mu", "2.5"}, {"c_vol", "3.0"}});
    CHECK(m1.kind == MaterialKind::NeoHookean);
    CHECK(m1.mu == 2.5);
    CHECK(v1.c == 3.0);

    auto [m2, v2] = material_from_config(
        {{"model", "ogden"}, {"mu_p", "1.0, -0.5"}, {"alpha_p", "2.0, -2.0"}});
    CHECK(m2.mu_p.size() == 2);
    CHECK(m2.alpha_p[1] == -2.0);
    CHECK(m2.mu_p[1] == -0.5);
    CHECK(v2.c == 1.0);

    auto [m3, v3] = material_from_config(
        {{"model", "yeoh"}, {"c1", "1"}, {"c2", "0.5"}, {"c3", "0.25"}});
    CHECK(m3.c3 == 0.25);
    (void)v3;

    CHECK_THROWS_AS(material_from_config({{"model", "bogus"}}), std::invalid_argument);
    CHECK_THROWS_AS(material_from_config({{"mu", "1"}}), std::invalid_argument);
    CHECK_THROWS_AS(material_from_config({{"model", "neo_hookean"}, {"mu", "-1"}}),
                    std::invalid_argument);
}
