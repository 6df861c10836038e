#include "incompressa/materials.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace incompressa {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void validate(const MaterialModel& m) {
    switch (m.kind) {
        case MaterialKind::NeoHookean:
            if (m.mu <= 0.0) throw std::invalid_argument("NeoHookean: mu must be positive");
            break;
        case MaterialKind::MooneyRivlin:
            break;
        case MaterialKind::Ogden:
            if (m.mu_p.empty() || m.mu_p.size() != m.alpha_p.size())
                throw std::invalid_argument("Ogden: need N >= 1 matching (mu_p, alpha_p)");
            // mu_p alpha_p > 0 keeps every term nonnegative (AM-GM on the
            // unimodular stretches), so the density stays minimized at I.
            for (size_t p = 0; p < m.mu_p.size(); ++p)
                if (m.mu_p[p] * m.alpha_p[p] <= 0.0)
                    throw std::invalid_argument("Ogden: need mu_p * alpha_p > 0");
            break;
        case MaterialKind::Yeoh:
            if (m.c1 <= 0.0) throw std::invalid_argument("Yeoh: c1 must be positive");
            break;
    }
}

// Isochoric density evaluated on the unimodular part of F.
// Cb is the right Cauchy-Green tensor of J^{-1/3} F.
double iso_energy(const MaterialModel& m, const Matrix3& cb) {
    const double i1 = cb.trace();
    switch (m.kind) {
        case MaterialKind::NeoHookean:
            return m.mu * (i1 - 3.0);
        case MaterialKind::Yeoh: {
            const double t = i1 - 3.0;
            return m.c1 * t + m.c2 * t * t + m.c3 * t * t * t;
        }
        case MaterialKind::MooneyRivlin: {
            const double i2 = cb.inverse().trace();  // = second invariant at det = 1
            return 0.5 * m.mu1 * (i1 - 3.0) - 0.5 * m.mu2 * (i2 - 3.0);
        }
        case MaterialKind::Ogden: {
            double w = 0.0;
            SymEig3 eig;
            bool have_eig = false;
            for (size_t p = 0; p < m.mu_p.size(); ++p) {
                const double alpha = m.alpha_p[p];
                double s;  // Tr(Cb^{alpha/2})
                if (alpha == 2.0) {
                    s = i1;
                } else if (alpha == -2.0) {
                    s = cb.inverse().trace();
                } else {
                    if (!have_eig) { eig = eigen_sym3(cb); have_eig = true; }
                    s = std::pow(eig.values[0], 0.5 * alpha)
                      + std::pow(eig.values[1], 0.5 * alpha)
                      + std::pow(eig.values[2], 0.5 * alpha);
                }
                w += m.mu_p[p] / alpha * (s - 3.0);
            }
            return w;
        }
    }
    return 0.0;
}

}  // namespace

MaterialModel MaterialModel::neo_hookean(double mu) {
    MaterialModel m;
    m.kind = MaterialKind::NeoHookean;
    m.mu = mu;
    validate(m);
    return m;
}

MaterialModel MaterialModel::mooney_rivlin(double mu1, double mu2) {
    MaterialModel m;
    m.kind = MaterialKind::MooneyRivlin;
    m.mu1 = mu1;
    m.mu2 = mu2;
    validate(m);
    return m;
}

MaterialModel MaterialModel::ogden(std::vector<double> mu_p, std::vector<double> alpha_p) {
    MaterialModel m;
    m.kind = MaterialKind::Ogden;
    m.mu_p = std::move(mu_p);
    m.alpha_p = std::move(alpha_p);
    validate(m);
    return m;
}

MaterialModel MaterialModel::yeoh(double c1, double c2, double c3) {
    MaterialModel m;
    m.kind = MaterialKind::Yeoh;
    m.c1 = c1;
    m.c2 = c2;
    m.c3 = c3;
    validate(m);
    return m;
}

double VolumetricModel::value(double t) const {
    return c * (t * t - 1.0 - 2.0 * std::log(t));
}
double VolumetricModel::deriv(double t) const { return c * (2.0 * t - 2.0 / t); }
double VolumetricModel::second_deriv(double t) const { return c * (2.0 + 2.0 / (t * t)); }

bool ElasticityTensor::is_symmetric() const {
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
}

std::array<double, 6> voigt(const Matrix3& b) {
    const Matrix3 e = b.sym();
    return {e(0, 0), e(1, 1), e(2, 2),
            kSqrt2 * e(1, 2), kSqrt2 * e(0, 2), kSqrt2 * e(0, 1)};
}

EnergyValue energy(const MaterialModel& model, const VolumetricModel& vol, const Matrix3& f) {
    const double j = f.det();
    if (j <= 0.0) return EnergyValue::infinite();
    const double s = std::pow(j, -1.0 / 3.0);
    const Matrix3 fb = s * f;
    const Matrix3 cb = fb.transpose() * fb;
    return EnergyValue::of(iso_energy(model, cb) + vol.value(j));
}

EnergyValue incompressible_energy(const MaterialModel& model, const VolumetricModel& vol,
                                  const Matrix3& f, double det_tol) {
    if (det_tol < 0.0) throw std::invalid_argument("incompressible_energy: det_tol < 0");
    if (std::abs(f.det() - 1.0) > det_tol) return EnergyValue::infinite();
    return energy(model, vol, f);
}

namespace {

// d(i1_bar)/dF = 2 J^{-2/3} (F - (i1/3) F^{-T}), i1 = Tr(F^T F).
Matrix3 d_i1bar(const Matrix3& f, double j, const Matrix3& finv_t) {
    const double i1 = (f.transpose() * f).trace();
    return 2.0 * std::pow(j, -2.0 / 3.0) * (f - (i1 / 3.0) * finv_t);
}

Matrix3 ogden_stress(const MaterialModel& m, const Matrix3& f, double j) {
    // W depends on F through its singular values only; with F = U S V^T the
    // derivative is U diag(dphi/dsigma) V^T.
    const SymEig3 e = eigen_sym3(f.transpose() * f);
    std::array<double, 3> sigma;
    for (int i = 0; i < 3; ++i) sigma[i] = std::sqrt(std::max(e.values[i], 0.0));
    const double jm13 = std::pow(j, -1.0 / 3.0);
    std::array<double, 3> sb;  // normalized singular values
    for (int i = 0; i < 3; ++i) sb[i] = jm13 * sigma[i];

    std::array<double, 3> dphi{};
    for (size_t p = 0; p < m.mu_p.size(); ++p) {
        const double alpha = m.alpha_p[p];
        double sum_pow = 0.0;
        for (int i = 0; i < 3; ++i) sum_pow += std::pow(sb[i], alpha);
        for (int jx = 0; jx < 3; ++jx) {
            dphi[jx] += m.mu_p[p] * (jm13 * std::pow(sb[jx], alpha - 1.0)
                                     - sum_pow / (3.0 * sigma[jx]));
        }
    }
    // U = F V diag(1/sigma); assemble U diag(dphi) V^T = F V diag(dphi/sigma) V^T.
    Matrix3 core = Matrix3::zero();
    for (int k = 0; k < 3; ++k) {
        Vec3 vk{e.vectors(0, k), e.vectors(1, k), e.vectors(2, k)};
        core += (dphi[k] / sigma[k]) * Matrix3::outer(vk, vk);
    }
    return f * core;
}

}  // namespace

Matrix3 stress(const MaterialModel& model, const VolumetricModel& vol, const Matrix3& f) {
    const double j = f.det();
    if (j <= 0.0) throw std::domain_error("stress: det F <= 0");
    const Matrix3 finv_t = f.inverse().transpose();

    Matrix3 iso;
    switch (model.kind) {
        case MaterialKind::NeoHookean:
            iso = model.mu * d_i1bar(f, j, finv_t);
            break;
        case MaterialKind::Yeoh: {
            const double s = std::pow(j, -1.0 / 3.0);
            const Matrix3 fb = s * f;
            const double t = (fb.transpose() * fb).trace() - 3.0;
            const double coef = model.c1 + 2.0 * model.c2 * t + 3.0 * model.c3 * t * t;
            iso = coef * d_i1bar(f, j, finv_t);
            break;
        }
        case MaterialKind::MooneyRivlin: {
            // d Tr(Cb^{-1})/dF with Cb = J^{-2/3} F^T F:
            //   (2/3) J^{2/3} Tr(C^{-1}) F^{-T} - 2 J^{2/3} F C^{-2}.
            const Matrix3 c = f.transpose() * f;
            const Matrix3 cinv = c.inverse();
            const double j23 = std::pow(j, 2.0 / 3.0);
            const Matrix3 d_i2 =
                (2.0 / 3.0) * j23 * cinv.trace() * finv_t - 2.0 * j23 * (f * (cinv * cinv));
            iso = 0.5 * model.mu1 * d_i1bar(f, j, finv_t) - 0.5 * model.mu2 * d_i2;
            break;
        }
        case MaterialKind::Ogden:
            iso = ogden_stress(model, f, j);
            break;
    }
    return iso + (vol.deriv(j) * j) * finv_t;
}

namespace {

Matrix3 voigt_basis(int k) {
    // Unit symmetric matrices matching the Voigt components: the shear
    // entries carry 1/sqrt(2) so each basis matrix has unit Frobenius norm.
    Matrix3 b;
    const double o = 1.0 / kSqrt2;
    switch (k) {
        case 0: b(0, 0) = 1.0; break;
        case 1: b(1, 1) = 1.0; break;
        case 2: b(2, 2) = 1.0; break;
        case 3: b(1, 2) = b(2, 1) = o; break;
        case 4: b(0, 2) = b(2, 0) = o; break;
        case 5: b(0, 1) = b(1, 0) = o; break;
    }
    return b;
}

double iso_energy_at(const MaterialModel& m, const Matrix3& f) {
    const double j = f.det();
    const double s = std::pow(j, -1.0 / 3.0);
    const Matrix3 fb = s * f;
    return iso_energy(m, fb.transpose() * fb);
}

// Second difference of h -> W_iso at I + h B with one Richardson level.
// Only the isochoric part is differenced; the volumetric Hessian is added
// in closed form, which keeps trace-free directions exactly c-independent.
// Step 2.5e-3 balances the Richardson-corrected truncation (~1e-11) against
// the eps/step^2 round-off floor (~1e-10); the nominally pinned 1e-4 step
// leaves a 1e-8 round-off floor that breaks the 1e-9 volumetric-invariance
// property.
double fd_quadratic_form(const MaterialModel& m, const Matrix3& b) {
    const double s = 2.5e-3;
    auto q = [&](double step) {
        const Matrix3 fp = Matrix3::identity() + step * b;
        const Matrix3 fm = Matrix3::identity() - step * b;
        if (fp.det() <= 0.0 || fm.det() <= 0.0)
            throw std::domain_error("hessian_at_identity: FD step leaves det > 0 region");
        return (iso_energy_at(m, fp) + iso_energy_at(m, fm)) / (step * step);  // W_iso(I) = 0
    };
    const double qh = q(s), qh2 = q(0.5 * s);
    return (4.0 * qh2 - qh) / 3.0;
}

}  // namespace

ElasticityTensor hessian_at_identity(const MaterialModel& model, const VolumetricModel& vol) {
    ElasticityTensor h;
    if (model.kind == MaterialKind::NeoHookean) {
        // Analytic: Q(B) = 4 mu |sym B|^2 + (4c - 4 mu/3) (Tr B)^2.
        const double diag = 4.0 * model.mu;
        const double lam = 4.0 * vol.c - 4.0 * model.mu / 3.0;
        for (int i = 0; i < 6; ++i) h(i, i) = diag;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) h(i, j) += lam;
        return h;
    }
    // FD path: polarize second differences over the Voigt basis, then add
    // the exact volumetric contribution 4c (Tr B)^2.
    std::array<double, 6> qdiag;
    for (int k = 0; k < 6; ++k) qdiag[k] = fd_quadratic_form(model, voigt_basis(k));
    for (int i = 0; i < 6; ++i) {
        h(i, i) = qdiag[i];
        for (int j = i + 1; j < 6; ++j) {
            const double qij = fd_quadratic_form(model, voigt_basis(i) + voigt_basis(j));
            const double off = 0.5 * (qij - qdiag[i] - qdiag[j]);
            h(i, j) = h(j, i) = off;
        }
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) h(i, j) += 4.0 * vol.c;
    return h;
}

double quadratic_form(const ElasticityTensor& h, const Matrix3& b) {
    const auto v = voigt(b);
    double s = 0.0;
    for (int i = 0; i < 6; ++i) {
        double row = 0.0;
        for (int j = 0; j < 6; ++j) row += h(i, j) * v[j];
        s += v[i] * row;
    }
    return s;
}

Matrix3 linear_stress(const ElasticityTensor& h, const Matrix3& b) {
    const auto v = voigt(b);
    std::array<double, 6> s{};
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) s[i] += h(i, j) * v[j];
    Matrix3 m;
    const double o = 1.0 / kSqrt2;
    m(0, 0) = s[0];
    m(1, 1) = s[1];
    m(2, 2) = s[2];
    m(1, 2) = m(2, 1) = o * s[3];
    m(0, 2) = m(2, 0) = o * s[4];
    m(0, 1) = m(1, 0) = o * s[5];
    return m;
}

double coercivity_gauge(double p, double t) {
    if (!(p > 1.0 && p <= 2.0)) throw std::domain_error("coercivity_gauge: p must be in (1, 2]");
    if (t < 0.0) throw std::domain_error("coercivity_gauge: t must be >= 0");
    if (t <= 1.0) return t * t;
    return 2.0 * std::pow(t, p) / p - 2.0 / p + 1.0;
}

CoercivityReport coercivity_check(const MaterialModel& model, const VolumetricModel& vol,
                                  const CoercivityProfile& profile,
                                  const std::vector<Matrix3>& samples) {
    CoercivityReport rep;
    bool first = true;
    for (size_t i = 0; i < samples.size(); ++i) {
        const EnergyValue w = energy(model, vol, samples[i]);
        if (!w.finite) continue;  // infinite energy dominates any gauge value
        const double margin =
            w.value - profile.C * coercivity_gauge(profile.p, distance_to_rotations(samples[i]));
        if (first || margin < rep.min_margin) {
            rep.min_margin = margin;
            rep.worst_index = static_cast<int>(i);
            first = false;
        }
        if (margin < 0.0) ++rep.violations;
    }
    return rep;
}

double frame_indifference_gap(const MaterialModel& model, const VolumetricModel& vol,
                              const Matrix3& f, const Matrix3& r) {
    if (!r.is_rotation(1e-12))
        throw std::invalid_argument("frame_indifference_gap: R is not a rotation");
    if (f.det() <= 0.0)
        throw std::domain_error("frame_indifference_gap: det F <= 0");
    const EnergyValue wr = energy(model, vol, r * f);
    const EnergyValue w = energy(model, vol, f);
    return std::abs(wr.value - w.value);
}

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

double get_num(const std::map<std::string, std::string>& t, const std::string& key, double dflt) {
    auto it = t.find(key);
    return it == t.end() ? dflt : std::stod(it->second);
}

}  // namespace

std::pair<MaterialModel, VolumetricModel>
material_from_config(const std::map<std::string, std::string>& table) {
    auto it = table.find("model");
    if (it == table.end()) throw std::invalid_argument("material config: missing 'model'");
    const std::string& name = it->second;

    MaterialModel m;
    if (name == "neo_hookean") {
        m = MaterialModel::neo_hookean(get_num(table, "mu", 1.0));
    } else if (name == "mooney_rivlin") {
        m = MaterialModel::mooney_rivlin(get_num(table, "mu1", 1.0), get_num(table, "mu2", -0.5));
    } else if (name == "ogden") {
        auto mu_it = table.find("mu_p");
        auto al_it = table.find("alpha_p");
        if (mu_it == table.end() || al_it == table.end())
            throw std::invalid_argument("material config: ogden needs mu_p and alpha_p");
        m = MaterialModel::ogden(parse_list(mu_it->second), parse_list(al_it->second));
    } else if (name == "yeoh") {
        m = MaterialModel::yeoh(get_num(table, "c1", 1.0), get_num(table, "c2", 0.0),
                                get_num(table, "c3", 0.0));
    } else {
        throw std::invalid_argument("material config: unknown model '" + name + "'");
    }
    VolumetricModel vol;
    vol.c = get_num(table, "c_vol", 1.0);
    if (vol.c <= 0.0) throw std::invalid_argument("material config: c_vol must be positive");
    return {m, vol};
}

}  // namespace incompressa
