#include "pf4/material.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace pf4 {

std::string_view to_string(Softening s)
{
    switch (s) {
    case Softening::Linear: return "linear";
    case Softening::Exponential: return "exponential";
    case Softening::Hyperbolic: return "hyperbolic";
    case Softening::Cornelissen: return "cornelissen";
    case Softening::Brittle: return "brittle";
    }
    return "?";
}

std::string_view to_string(ModelOrder o) { return o == ModelOrder::Second ? "second" : "fourth"; }

std::string_view to_string(StressState s) { return s == StressState::PlaneStress ? "plane_stress" : "plane_strain"; }

Softening softening_from_string(std::string_view s)
{
    for (auto v : {Softening::Linear, Softening::Exponential, Softening::Hyperbolic, Softening::Cornelissen,
                   Softening::Brittle}) {
        if (to_string(v) == s) return v;
    }
    throw std::invalid_argument("unknown softening law '" + std::string(s) + "'");
}

ModelOrder order_from_string(std::string_view s)
{
    if (s == "second") return ModelOrder::Second;
    if (s == "fourth") return ModelOrder::Fourth;
    throw std::invalid_argument("unknown model order '" + std::string(s) + "'");
}

StressState stress_state_from_string(std::string_view s)
{
    if (s == "plane_stress") return StressState::PlaneStress;
    if (s == "plane_strain") return StressState::PlaneStrain;
    throw std::invalid_argument("unknown stress state '" + std::string(s) + "'");
}

SofteningCoeffs softening_coeffs(Softening law)
{
    switch (law) {
    case Softening::Linear: return {2.0, -0.5, 0.0};
    case Softening::Exponential: return {2.5, 0.1748, 0.0};
    case Softening::Hyperbolic: return {4.0, 0.5397, 0.0};
    case Softening::Cornelissen: return {2.0, 1.3868, 0.9106};
    case Softening::Brittle: break;
    }
    throw std::invalid_argument("brittle mode has no cohesive softening coefficients");
}

MaterialModel::MaterialModel(const MaterialParams& p) : params(p)
{
    if (!(p.E0 > 0 && p.Gc > 0 && p.ft > 0 && p.l0 > 0)) {
        throw std::invalid_argument("E0, Gc, ft and l0 must be positive");
    }
    if (!(p.nu > 0.0 && p.nu < 0.5)) throw std::invalid_argument("Poisson ratio must lie in (0, 0.5)");

    const double lam3d = p.E0 * p.nu / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu));
    mu = p.E0 / (2.0 * (1.0 + p.nu));
    lambda = p.stress_state == StressState::PlaneStress ? 2.0 * lam3d * mu / (lam3d + 2.0 * mu) : lam3d;

    l_ch = p.E0 * p.Gc / (p.ft * p.ft);
    H0 = p.ft * p.ft / (2.0 * p.E0);
    if (p.softening == Softening::Brittle) {
        chi = 0.0;
        n = 2.0;
        a1 = 2.0;
        a2 = -0.5;
        a3 = 0.0;
        history_floor = false;
    } else {
        if (!(p.chi >= 0.0 && p.chi <= 2.0)) throw std::invalid_argument("chi must lie in [0, 2]");
        chi = p.chi;
        a1 = 4.0 * l_ch / (std::numbers::pi * p.l0);
        const auto c = softening_coeffs(p.softening);
        n = c.n;
        a2 = c.a2;
        a3 = c.a3;
        history_floor = true;
    }
    c_alpha = c_alpha_for(chi);
    const double bound_tol = 5e-3;
    bound_penalty = 27.0 / (64.0 * bound_tol * bound_tol) * p.Gc / p.l0;
}

Eigen::Matrix3d MaterialModel::elasticity_matrix() const
{
    Eigen::Matrix3d C;
    C << lambda + 2 * mu, lambda, 0, lambda, lambda + 2 * mu, 0, 0, 0, mu;
    return C;
}

StrainSplit split_strain(const Eigen::Matrix2d& eps)
{
    const double a = eps(0, 0), c = eps(1, 1);
    const double b = 0.5 * (eps(0, 1) + eps(1, 0));
    const double m = 0.5 * (a + c);
    const double r = std::hypot(0.5 * (a - c), b);

    StrainSplit s;
    s.eigenvalues = Eigen::Vector2d(m + r, m - r);
    const double theta = (r > 0.0) ? 0.5 * std::atan2(2.0 * b, a - c) : 0.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    s.eigenvectors << ct, -st, st, ct;

    s.plus.setZero();
    s.minus.setZero();
    for (int k = 0; k < 2; ++k) {
        const Eigen::Vector2d nk = s.eigenvectors.col(k);
        const double e = s.eigenvalues[k];
        if (e > 0.0) {
            s.plus += e * nk * nk.transpose();
        } else {
            s.minus += e * nk * nk.transpose();
        }
    }
    return s;
}

namespace {

inline double pos(double x) { return x > 0.0 ? x : 0.0; }
inline double neg(double x) { return x < 0.0 ? x : 0.0; }

}  // namespace

EnergySplit energy_split(const Eigen::Matrix2d& eps, const MaterialModel& mat)
{
    const auto s = split_strain(eps);
    const double tr = eps.trace();
    const double tp = pos(tr), tm = neg(tr);
    const double ep0 = pos(s.eigenvalues[0]), ep1 = pos(s.eigenvalues[1]);
    const double em0 = neg(s.eigenvalues[0]), em1 = neg(s.eigenvalues[1]);
    return {0.5 * mat.lambda * tp * tp + mat.mu * (ep0 * ep0 + ep1 * ep1),
            0.5 * mat.lambda * tm * tm + mat.mu * (em0 * em0 + em1 * em1)};
}

double elastic_energy(const Eigen::Matrix2d& eps, const MaterialModel& mat)
{
    const double tr = eps.trace();
    return 0.5 * mat.lambda * tr * tr + mat.mu * (eps * eps).trace();
}

StressResult stress(const Eigen::Matrix2d& eps, double phi, const MaterialModel& mat)
{
    const auto s = split_strain(eps);
    const double tr = eps.trace();
    const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
    StressResult r;
    r.plus = mat.lambda * pos(tr) * I + 2.0 * mat.mu * s.plus;
    r.minus = mat.lambda * neg(tr) * I + 2.0 * mat.mu * s.minus;
    r.sigma = degradation_fn(phi, mat).g * r.plus + r.minus;
    return r;
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double c_alpha_for(double chi)
{
    if (!(chi >= 0.0 && chi <= 2.0)) throw std::invalid_argument("chi must lie in [0, 2]");
    if (chi == 0.0) return 2.0;
    if (chi == 2.0) return std::numbers::pi;
    // beta = t^2 removes the sqrt(beta) endpoint singularity.
    auto f = [chi](double t) { return 8.0 * t * t * std::sqrt(chi + (1.0 - chi) * t * t); };
    const double fa = f(0.0), fm = f(0.5), fb = f(1.0);
    return adaptive_simpson(f, 0.0, 1.0, fa, fm, fb, (fa + 4 * fm + fb) / 6.0, 1e-14, 50);
}

GeometricFn geometric_fn(double phi, double chi)
{
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must lie in [0, 1]");
    const double c = c_alpha_for(chi);
    return {chi * phi + (1.0 - chi) * phi * phi, chi + 2.0 * (1.0 - chi) * phi, 2.0 * (1.0 - chi), c};
}

namespace {

Degradation rational_degradation(double phi, double n, double a1, double a2, double a3)
{
    const double base = std::max(1.0 - phi, 0.0);
    const double A = std::pow(base, n);
    const double A1 = -n * std::pow(base, n - 1.0);
    const double A2 = n * (n - 1.0) * std::pow(base, n - 2.0);
    const double B = a1 * phi * (1.0 + a2 * phi + a3 * phi * phi);
    const double B1 = a1 * (1.0 + 2.0 * a2 * phi + 3.0 * a3 * phi * phi);
    const double B2 = a1 * (2.0 * a2 + 6.0 * a3 * phi);
    const double D = A + B;
    assert(D > 0.0);
    const double Nn = A1 * B - A * B1;
    const double Nn1 = A2 * B - A * B2;
    return {A / D, Nn / (D * D), Nn1 / (D * D) - 2.0 * Nn * (A1 + B1) / (D * D * D)};
}

}  // namespace

Degradation degradation_fn(double phi, double n, double a1, double a2, double a3)
{
    // Outside [0, 1] the rational form loses meaning (its denominator vanishes
    // just below 0 for large a1), so it is continued by the second-order
    // Taylor polynomial at the nearer end. This keeps g twice differentiable.
    if (phi >= 0.0 && phi <= 1.0) return rational_degradation(phi, n, a1, a2, a3);
    const double end = phi < 0.0 ? 0.0 : 1.0;
    const auto e = rational_degradation(end, n, a1, a2, a3);
    const double d = phi - end;
    return {e.g + e.d1 * d + 0.5 * e.d2 * d * d, e.d1 + e.d2 * d, e.d2};
}

Degradation degradation_fn(double phi, const MaterialModel& mat)
{
    if (mat.brittle()) return {(1.0 - phi) * (1.0 - phi), -2.0 * (1.0 - phi), 2.0};
    return degradation_fn(phi, mat.n, mat.a1, mat.a2, mat.a3);
}

namespace {

struct Principal {
    double value;
    Eigen::Vector2d direction;
};

Principal major_principal(const Eigen::Matrix2d& s)
{
    const double a = s(0, 0), c = s(1, 1), b = 0.5 * (s(0, 1) + s(1, 0));
    const double r = std::hypot(0.5 * (a - c), b);
    const double theta = (r > 0.0) ? 0.5 * std::atan2(2.0 * b, a - c) : 0.0;
    return {0.5 * (a + c) + r, Eigen::Vector2d(std::cos(theta), std::sin(theta))};
}

}  // namespace

double driving_force(const Eigen::Matrix2d& eps, const MaterialModel& mat)
{
    const auto sp = stress(eps, 0.0, mat).plus;
    const double seq = pos(major_principal(sp).value);
    return seq * seq / (2.0 * mat.params.E0);
}

Eigen::Vector3d driving_force_gradient(const Eigen::Matrix2d& eps, const MaterialModel& mat)
{
    const auto sp = stress(eps, 0.0, mat).plus;
    const auto pr = major_principal(sp);
    if (pr.value <= 0.0) return Eigen::Vector3d::Zero();
    const Eigen::Vector2d m = pr.direction;
    const Eigen::Vector3d v(m.x() * m.x(), m.y() * m.y(), 2.0 * m.x() * m.y());
    const Eigen::Matrix3d Cp = split_tangent(eps, mat).plus;
    return (pr.value / mat.params.E0) * (Cp.transpose() * v);
}

double history_floor(const MaterialModel& mat) { return mat.history_floor ? mat.H0 : 0.0; }

QuadPointState fresh_state(const MaterialModel& mat) { return {history_floor(mat), Eigen::Matrix2d::Zero()}; }

QuadPointState update_history(const QuadPointState& state, double H_trial, const MaterialModel& mat)
{
    QuadPointState out = state;
    out.H = std::max({state.H, H_trial, history_floor(mat)});
    return out;
}

SplitTangent split_tangent(const Eigen::Matrix2d& eps, const MaterialModel& mat)
{
    const auto s = split_strain(eps);
    const double e1 = s.eigenvalues[0], e2 = s.eigenvalues[1];
    const Eigen::Vector2d n1 = s.eigenvectors.col(0), n2 = s.eigenvectors.col(1);
    const Eigen::Matrix2d P1 = n1 * n1.transpose();
    const Eigen::Matrix2d P2 = n2 * n2.transpose();
    auto heav = [](double x) { return x > 0.0 ? 1.0 : 0.0; };

    // Coupling coefficient of the eigenprojection derivative; the coalescent
    // limit is the ramp slope.
    double theta;
    if (std::abs(e1 - e2) < 1e-9) {
        theta = heav(0.5 * (e1 + e2));
    } else {
        theta = (pos(e1) - pos(e2)) / (e1 - e2);
    }

    // Fourth-order d eps+ / d eps with minor symmetries.
    auto dplus = [&](int i, int j, int k, int l) {
        const double t1 = heav(e1) * P1(i, j) * P1(k, l) + heav(e2) * P2(i, j) * P2(k, l);
        const double box = 0.5 * (P1(i, k) * P2(j, l) + P1(i, l) * P2(j, k)) +
                           0.5 * (P2(i, k) * P1(j, l) + P2(i, l) * P1(j, k));
        return t1 + theta * box;
    };
    auto ident = [](int i, int j, int k, int l) {
        return 0.5 * ((i == k && j == l ? 1.0 : 0.0) + (i == l && j == k ? 1.0 : 0.0));
    };

    static constexpr int vi[3] = {0, 1, 0};
    static constexpr int vj[3] = {0, 1, 1};
    const double ht = heav(eps.trace());
    SplitTangent t;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const int i = vi[a], j = vj[a], k = vi[b], l = vj[b];
            const double vol = (i == j ? 1.0 : 0.0) * (k == l ? 1.0 : 0.0);
            const double dp = dplus(i, j, k, l);
            t.plus(a, b) = mat.lambda * ht * vol + 2.0 * mat.mu * dp;
            t.minus(a, b) = mat.lambda * (1.0 - ht) * vol + 2.0 * mat.mu * (ident(i, j, k, l) - dp);
        }
    }
    return t;
}

Eigen::Matrix3d material_tangent(const Eigen::Matrix2d& eps, double phi, const MaterialModel& mat)
{
    const auto t = split_tangent(eps, mat);
    return degradation_fn(phi, mat).g * t.plus + t.minus;
}

}  // namespace pf4
