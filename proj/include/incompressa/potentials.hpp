#pragma once

#include <map>
#include <string>
#include <vector>

#include "incompressa/fields.hpp"
#include "incompressa/flow.hpp"

namespace incompressa {

/// Removes the gradient part of a periodic field: returns v - grad(phi) with
/// the discrete Poisson problem for phi solved by conjugate gradients until
/// the residual drops below tol * |v|_{L2}. Throws on non-convergence (the
/// message carries the final residual).
VectorField leray_project(const VectorField& v, double tol, int max_iter);

/// Vector potential on the torus: solves the componentwise Poisson problem
/// -Lap w = curl v, yielding div w ~ 0 and curl w ~ v. Requires v
/// divergence-free within tol and zero mean per component (a constant field
/// is discretely harmonic and has no curl potential). The round-trip defect
/// |curl w - v| is verified against 10 * tol before returning.
VectorField curl_inverse(const VectorField& v, double tol, int max_iter);

/// One Fourier mode of a closed-form vector potential:
/// w += amplitude * sin(2 pi k . x + phase).
struct TrigMode {
    Vec3 k;
    Vec3 amplitude;
    double phase = 0.0;
};

/// curl of a trigonometric vector potential; divergence-free by construction
/// with closed-form Jacobian, periodic over the unit box for integer k.
AnalyticVelocity curl_of_trig(const std::vector<TrigMode>& modes, const std::string& name);

/// curl of the compactly supported potential (0, 0, bump(x) * x_1); the
/// velocity and its gradient vanish on the unit-box boundary.
AnalyticVelocity curl_of_bump_linear();

/// Named divergence-free velocity library: zero, rigid, shear, abc,
/// curl_trig, curl_bump. Parameters (omega_*, a/b/c, axes) come from the
/// optional table.
AnalyticVelocity make_analytic_divfree(const std::string& name,
                                       const std::map<std::string, std::string>& params = {});

}  // namespace incompressa
