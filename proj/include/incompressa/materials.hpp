#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "incompressa/matrix3.hpp"

namespace incompressa {

/// Extended-real energy value. The infinite state is an explicit tag so
/// optimizers branch on feasibility instead of propagating IEEE infinities.
struct EnergyValue {
    double value = 0.0;
    bool finite = true;

    static EnergyValue of(double v) { return {v, true}; }
    static EnergyValue infinite() { return {0.0, false}; }
    bool is_finite() const { return finite; }
};

enum class MaterialKind { NeoHookean, MooneyRivlin, Ogden, Yeoh };

/// Parameters of an isochoric strain-energy density. The stored moduli are
/// in consistent stress units; the density itself acts on the unimodular
/// part of the deformation gradient.
struct MaterialModel {
    MaterialKind kind = MaterialKind::NeoHookean;
    double mu = 1.0;                 // NeoHookean shear modulus
    double mu1 = 1.0, mu2 = -0.5;    // MooneyRivlin pair
    std::vector<double> mu_p;        // Ogden moduli
    std::vector<double> alpha_p;     // Ogden exponents
    double c1 = 1.0, c2 = 0.0, c3 = 0.0;  // Yeoh coefficients

    static MaterialModel neo_hookean(double mu);
    static MaterialModel mooney_rivlin(double mu1, double mu2);
    static MaterialModel ogden(std::vector<double> mu_p, std::vector<double> alpha_p);
    static MaterialModel yeoh(double c1, double c2, double c3);
};

/// Volumetric penalty c (t^2 - 1 - 2 ln t); zero with zero slope at t = 1,
/// positive elsewhere on t > 0.
struct VolumetricModel {
    double c = 1.0;

    double value(double t) const;
    double deriv(double t) const;
    double second_deriv(double t) const;
};

/// Quadratic form of the energy density at the identity, acting on
/// symmetric 3x3 matrices. Stored as a symmetric 6x6 array in Voigt order
/// (11, 22, 33, 23, 13, 12) with sqrt(2) scaling on the off-diagonal
/// components, so the 6-vector of a symmetric E satisfies |vec(E)|^2 = |E|^2
/// and the array acts as a plain inner-product form. All modules share this
/// convention.
struct ElasticityTensor {
    std::array<double, 36> a{};

    double& operator()(int i, int j) { return a[6 * i + j]; }
    double operator()(int i, int j) const { return a[6 * i + j]; }

    double min_eigenvalue() const { return symmetric_eigenvalues(a.data(), 6).front(); }
    bool is_symmetric() const;
};

/// Voigt 6-vector of the symmetric part of B (sqrt(2)-scaled shears).
std::array<double, 6> voigt(const Matrix3& b);

/// Growth profile for the coercivity lower bound: exponent p in (1,2] and
/// constant C > 0.
struct CoercivityProfile {
    double p = 2.0;
    double C = 1.0;
};

/// Isochoric-volumetric energy W(F) = W_iso((det F)^{-1/3} F) + W_vol(det F),
/// extended by the infinite tag when det F <= 0.
EnergyValue energy(const MaterialModel& model, const VolumetricModel& vol, const Matrix3& f);

/// Incompressible extension: energy(F) if |det F - 1| <= det_tol, else infinite.
EnergyValue incompressible_energy(const MaterialModel& model, const VolumetricModel& vol,
                                  const Matrix3& f, double det_tol);

/// First derivative DW(F) as a 3x3 matrix; analytic per variant (the Ogden
/// case goes through the singular-value decomposition of F).
/// Throws std::domain_error if det F <= 0.
Matrix3 stress(const MaterialModel& model, const VolumetricModel& vol, const Matrix3& f);

/// 6x6 representation of B -> sym B : D2W(I) : sym B. Analytic for
/// NeoHookean (and the volumetric part always); other variants use central
/// second differences of the energy with one Richardson level.
ElasticityTensor hessian_at_identity(const MaterialModel& model, const VolumetricModel& vol);

/// sym B : H : sym B (no 1/2 factor; callers apply their own).
double quadratic_form(const ElasticityTensor& h, const Matrix3& b);

/// Linear stress of a strain: the symmetric matrix S with
/// voigt(S) = H voigt(sym B), so that quadratic_form(H, B) = S : sym B.
Matrix3 linear_stress(const ElasticityTensor& h, const Matrix3& b);

/// Coercivity gauge: t^2 on [0,1], 2 t^p / p - 2/p + 1 beyond.
/// Requires p in (1,2] and t >= 0.
double coercivity_gauge(double p, double t);

struct CoercivityReport {
    double min_margin = 0.0;   // min over samples of W(F) - C g_p(d(F, SO(3)))
    int violations = 0;        // samples with negative margin
    int worst_index = -1;      // argmin sample, -1 if no samples
};

/// Evaluates W(F) - C g_p(d(F, SO(3))) on each sample; violations are data,
/// not errors.
CoercivityReport coercivity_check(const MaterialModel& model, const VolumetricModel& vol,
                                  const CoercivityProfile& profile,
                                  const std::vector<Matrix3>& samples);

/// |W(RF) - W(F)| for a rotation R (validated within 1e-12).
double frame_indifference_gap(const MaterialModel& model, const VolumetricModel& vol,
                              const Matrix3& f, const Matrix3& r);

/// Builds a material + volumetric pair from a flat key/value table with keys
/// model, mu, mu1, mu2, mu_p, alpha_p, c1..c3, c_vol (list values comma
/// separated).
std::pair<MaterialModel, VolumetricModel>
material_from_config(const std::map<std::string, std::string>& table);

}  // namespace incompressa
