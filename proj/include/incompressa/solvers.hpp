#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "incompressa/fields.hpp"
#include "incompressa/materials.hpp"

namespace incompressa {

/// Quadratic functional with the divergence constraint: domain with its
/// Dirichlet marker, uniform elasticity tensor, load, and optional
/// divergence-free boundary displacement (zero for the homogeneous case).
struct LinearizedProblem {
    BoxDomain domain;
    ElasticityTensor tensor;
    VectorField load;
    std::optional<VectorField> boundary_data;  // vbar; nullopt means zero
    double stab_beta = 0.1;  // pressure-Laplacian stabilization * spacing^2
};

/// Velocity/pressure solution with residuals of the discrete system.
struct SaddleSolution {
    VectorField v;
    ScalarField q;
    double momentum_residual = 0.0;    // RMS of A v + grad q - f on free nodes
    double continuity_residual = 0.0;  // RMS of div v - eps lap q (stabilized row)
    double div_l2 = 0.0;               // physical L2 norm of div v
    int outer_iterations = 0;
    long inner_iterations = 0;
};

/// Quadrature of f . v.
double load_functional(const VectorField& f, const VectorField& v);

/// 1/2 int E(v) : H : E(v) - L(v); infinite tag when |div v|_{L2} exceeds
/// div_tol. Throws if v violates the Dirichlet data nodally.
EnergyValue linearized_energy(const LinearizedProblem& p, const VectorField& v, double div_tol,
                              double bc_tol = 1e-9);

/// Solves the stabilized velocity/pressure system
///   A v + grad q = f,   div v - eps lap_N q = 0,   v = vbar on the boundary,
/// with A the compact strong-form operator of the quadratic form,
/// eps = stab_beta * spacing^2 / tensor scale. Outer Krylov iteration on the
/// pressure Schur complement, inner conjugate-gradient solves with A.
/// Requires Gamma = FullBoundary. q0 seeds the pressure iteration.
SaddleSolution solve_linearized(const LinearizedProblem& p, double tol, int max_iter,
                                const std::optional<ScalarField>& q0 = std::nullopt);

enum class ConstraintMode { Penalty, AugmentedLagrangian };

struct OptimizerOptions {
    double gtol = 1e-10;        // Euclidean gradient norm over free dofs
    int max_iterations = 5000;  // L-BFGS iterations per inner solve
    int memory = 10;
    double backtrack = 0.5;
    double initial_step = 1.0;
    double sufficient_decrease = 1e-4;
    int al_max_outer = 12;      // multiplier updates
    double weight_growth = 10.0;
    double max_weight = 1e8;
    double polish_gtol = 0.0;   // extra minimize after feasibility; 0 = off
};

/// Scaled nonlinear functional h^-2 int [W_iso(J^{-1/3} F_h) + pen(J)] - L(v)
/// with F_h = I + h grad v, plus optional multiplier terms on (J - 1) and an
/// optional fixed cross stress (linear term int S : grad v used by the
/// nonhomogeneous shift).
struct NonlinearProblem {
    BoxDomain domain;
    MaterialModel material;
    VolumetricModel volumetric{1.0};  // the material's own volumetric part (reporting)
    double h = 0.1;
    VectorField load;
    ConstraintMode mode = ConstraintMode::AugmentedLagrangian;
    double weight = 10.0;
    double det_tol = 1e-6;
    OptimizerOptions opts;
    std::optional<TensorField> cross_stress;  // symmetric S-bar, adds int S-bar : grad v
    double energy_offset = 0.0;               // constant added to reported objective
};

struct NonlinearEnergyReport {
    EnergyValue objective;      // penalty objective (+ cross term + offset)
    double incompressible = 0.0;  // h^-2 int W_iso(J^{-1/3}F_h) - L(v) + cross + offset
    double max_det_err = 0.0;     // max |J - 1|
};

/// Evaluates the scaled functional at v (no multiplier terms).
NonlinearEnergyReport nonlinear_energy(const NonlinearProblem& p, const VectorField& v);

enum class MinimizeStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
    StalledConstraint,  // AL made no feasibility progress at the weight cap
};

struct MinimizeReport {
    MinimizeStatus status = MinimizeStatus::Converged;
    int outer_iterations = 0;      // AL cycles (1 in penalty mode)
    long lbfgs_iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;        // final inner objective (with multipliers)
    double incompressible = 0.0;   // reported G_h value at the final iterate
    double max_det_err = 0.0;
    std::string message;
};

/// Limited-memory quasi-Newton descent with backtracking; steps producing
/// J <= 0 anywhere are rejected by the line search. AugmentedLagrangian mode
/// wraps the descent in multiplier updates until max|J-1| <= det_tol.
/// init must satisfy the Dirichlet data (free dofs are the non-Gamma nodes).
std::pair<VectorField, MinimizeReport> minimize_nonlinear(const NonlinearProblem& p,
                                                          const VectorField& init);

/// The three shifted functionals of the nonhomogeneous construction built
/// around a divergence-free boundary displacement vbar.
class ShiftedFunctionals {
  public:
    ShiftedFunctionals(const LinearizedProblem& base, VectorField vbar, double div_tol);

    /// int E(vbar) : H : E(v) dx
    double cross_term(const VectorField& v) const;
    /// value of the constrained quadratic functional at vbar itself
    double gbar_offset() const { return gbar_offset_; }
    /// shifted linearized functional (argument satisfies v = 0 on Gamma)
    EnergyValue gtilde(const VectorField& v) const;
    /// plain functional with data vbar (argument satisfies v = vbar on Gamma)
    EnergyValue gbar(const VectorField& v) const;
    /// shifted scaled nonlinear functional at parameter h
    NonlinearEnergyReport gtilde_h(const NonlinearProblem& base, const VectorField& v) const;

    const TensorField& cross_stress() const { return sbar_; }
    const VectorField& vbar() const { return vbar_; }

  private:
    LinearizedProblem base_;
    VectorField vbar_;
    TensorField sbar_;  // H : E(vbar)
    double div_tol_;
    double gbar_offset_ = 0.0;
};

/// One row of the h-sweep table.
struct ConvergenceRecord {
    double h = 0.0;
    double e_nonlinear = 0.0;
    double e_linear_min = 0.0;
    double gap = 0.0;
    double dist_w1p = 0.0;
    double max_det_err = 0.0;
    long iters = 0;
};

}  // namespace incompressa
