#include "doctest.h"

#include <random>

#include "incompressa/matrix3.hpp"
#include "support.hpp"

using namespace incompressa;
using namespace testsupport;

TEST_CASE("basic matrix algebra") {
    Matrix3 m;
    m(0, 0) = 1; m(0, 1) = 2; m(0, 2) = 3;
    m(1, 0) = 0; m(1, 1) = 1; m(1, 2) = 4;
    m(2, 0) = 5; m(2, 1) = 6; m(2, 2) = 0;
    CHECK(m.det() == doctest::Approx(1.0));  // classic unimodular example
    const Matrix3 inv = m.inverse();
    const Matrix3 prod = m * inv;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    CHECK(m.transpose()(0, 2) == 5);
    CHECK(m.trace() == 2.0);
}

TEST_CASE("rotation helpers") {
    const Matrix3 r = rotation_about_axis({0, 0, 1}, M_PI / 3.0);
    CHECK(r(0, 0) == doctest::Approx(0.5));
    CHECK(r(0, 1) == doctest::Approx(-std::sqrt(3.0) / 2.0));
    CHECK(r.is_rotation(1e-12));
    CHECK(!Matrix3::diagonal(1, 1, 2).is_rotation(1e-12));
    CHECK(!Matrix3::diagonal(1, 1, -1).is_rotation(1e-12));

    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) CHECK(random_rotation(rng).is_rotation(1e-12));
}

TEST_CASE("symmetric eigenvalues") {
    const Matrix3 d = Matrix3::diagonal(3.0, -1.0, 2.0);
    std::mt19937_64 rng(11);
    const Matrix3 q = random_rotation(rng);
    const Matrix3 a = q * d * q.transpose();
    const SymEig3 e = eigen_sym3(a);
    CHECK(e.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(e.values[2] == doctest::Approx(3.0).epsilon(1e-12));
    // eigenvectors reproduce A v = lambda v
    for (int c = 0; c < 3; ++c) {
        Vec3 v{e.vectors(0, c), e.vectors(1, c), e.vectors(2, c)};
        const Vec3 av = a * v;
        const Vec3 lv = e.values[c] * v;
        CHECK((av - lv).norm() == doctest::Approx(0.0).epsilon(1e-10));
    }
}

TEST_CASE("singular values") {
    const auto s = singular_values(Matrix3::diagonal(2.0, 0.5, 1.0));
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("distance to rotations, positive determinant") {
    CHECK(distance_to_rotations(Matrix3::identity()) == doctest::Approx(0.0).epsilon(1e-12));
    std::mt19937_64 rng(3);
    CHECK(distance_to_rotations(random_rotation(rng)) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(distance_to_rotations(Matrix3::diagonal(2, 1, 1)) == doctest::Approx(1.0));
    // rotation invariance
    const Matrix3 f = Matrix3::diagonal(1.7, 0.6, 1.1);
    const Matrix3 r = random_rotation(rng);
    CHECK(distance_to_rotations(r * f) ==
          doctest::Approx(distance_to_rotations(f)).epsilon(1e-10));
}

TEST_CASE("distance to rotations, fallback agrees with signed closed form") {
    // For det F < 0 the exact value is |F|^2 + 3 - 2 (s1 + s2 - s3) with
    // s3 the smallest singular value.
    auto closed_form = [](const Matrix3& f) {
        const auto s = singular_values(f);
        const double m = s[1] + s[2] - s[0];
        double f2 = 0.0;
        for (double a : f.a) f2 += a * a;
        return std::sqrt(f2 + 3.0 - 2.0 * m);
    };
    const Matrix3 cases[] = {Matrix3::diagonal(1, 1, -1), Matrix3::diagonal(2, 0.5, -1.5)};
    for (const Matrix3& f : cases) {
        CHECK(distance_to_rotations(f) == doctest::Approx(closed_form(f)).epsilon(1e-3));
    }
}
