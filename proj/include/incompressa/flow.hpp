#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "incompressa/fields.hpp"
#include "incompressa/matrix3.hpp"

namespace incompressa {

/// Smooth velocity callable with its Jacobian. Divergence-freeness and the
/// set where the velocity vanishes are declared metadata; the declared
/// bounding box is the domain trajectories must stay inside (defaults to
/// all of space).
struct AnalyticVelocity {
    std::string name;
    std::function<Vec3(const Vec3&)> value;
    std::function<Matrix3(const Vec3&)> jacobian;
    bool divergence_free = false;
    GammaMarker zero_set = GammaMarker::none();
    Vec3 box_lo{-std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
    Vec3 box_hi{std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};

    bool inside(const Vec3& p) const {
        return p.x >= box_lo.x && p.x <= box_hi.x && p.y >= box_lo.y && p.y <= box_hi.y &&
               p.z >= box_lo.z && p.z <= box_hi.z;
    }
};

/// Max sampled |div v| over a deterministic pseudo-random point cloud in the
/// given box; used to validate the divergence-free declaration.
double max_sampled_divergence(const AnalyticVelocity& v, const Vec3& lo, const Vec3& hi,
                              int samples, unsigned long long seed);

/// State of the flow map at one point: position, gradient and time.
/// For divergence-free velocities det Z stays 1 up to integration error.
struct FlowState {
    Vec3 y;
    Matrix3 z;
    double t = 0.0;
};

/// Jointly integrates dy/dt = v(y), dZ/dt = (grad v)(y) Z from (x, I) to
/// t = h with classical fixed-step RK4 (h/steps per step).
FlowState integrate_flow(const AnalyticVelocity& v, const Vec3& x, double h, int steps);

/// Displacement sample v_h = (y(h, .) - id)/h on a grid with diagnostics.
struct RecoveryResult {
    double h = 0.0;
    int steps = 0;
    VectorField vh;
    /// max |det Z - 1| with Z from the integrated variational equation
    double max_det_err_integrated = 0.0;
    /// max |det(I + h grad_h v_h) - 1| with the discrete gradient of the sample
    double max_det_err_discrete = 0.0;
    /// discrete W^{1,2} distance to the exact velocity (integrated gradients)
    double dist_w12 = 0.0;
    /// sup-norm of h grad v_h = Z - I (Frobenius per node)
    double sup_h_grad = 0.0;
    /// Gamma-fixing diagnostic: applicable when the velocity declares a
    /// vanishing set; max |v_h| over those nodes
    bool gamma_applicable = false;
    double gamma_max_violation = 0.0;
};

/// Runs the flow construction on every node of the domain. Trajectories
/// leaving the velocity's declared box abort with an error naming the node.
RecoveryResult recover(const AnalyticVelocity& v, double h, const BoxDomain& domain, int steps);

/// One `recover` per h; the caller inspects the per-h diagnostic decay.
std::vector<RecoveryResult> recovery_sweep(const AnalyticVelocity& v,
                                           const std::vector<double>& h_list,
                                           const BoxDomain& domain, int steps);

/// Built-in velocity library.
AnalyticVelocity velocity_zero();
AnalyticVelocity velocity_rigid(const Vec3& omega);
/// v_i = x_j for an axis pair (i != j).
AnalyticVelocity velocity_shear(int i, int j);
/// Beltrami field (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x).
AnalyticVelocity velocity_abc(double a, double b, double c);

namespace serial {
/// Serial reference of `recover`, kept for testing and benchmarking.
RecoveryResult recover(const AnalyticVelocity& v, double h, const BoxDomain& domain, int steps);
}  // namespace serial

}  // namespace incompressa
