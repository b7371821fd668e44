#include "pf4/oracle1d.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <limits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pf4/discretization.hpp"
#include "pf4/splines.hpp"

namespace pf4 {

double crack_density(double phi, double dphi, double d2phi, double l0, double chi, ModelOrder order)
{
    const double alpha = chi * phi + (1.0 - chi) * phi * phi;
    double d = alpha / l0;
    if (order == ModelOrder::Fourth) {
        d += 0.5 * l0 * dphi * dphi + l0 * l0 * l0 / 16.0 * d2phi * d2phi;
    } else {
        d += l0 * dphi * dphi;
    }
    return d / c_alpha_for(chi);
}

GammaResult gamma_integral(const Profile1D& p)
{
    const std::size_t n = p.x.size();
    if (n < 2 || p.phi.size() != n || p.dphi.size() != n || p.d2phi.size() != n) {
        throw std::invalid_argument("profile arrays are inconsistent");
    }
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        f[i] = crack_density(p.phi[i], p.dphi[i], p.d2phi[i], p.l0, p.chi, p.order);
    }

    // Pieces split at x = 0 (kink of the profile); Simpson where the piece is
    // uniform with an even interval count, trapezoid otherwise.
    auto piece = [&](std::size_t a, std::size_t b) {
        if (b <= a) return 0.0;
        const std::size_t m = b - a;
        const double h = (p.x[b] - p.x[a]) / static_cast<double>(m);
        bool uniform = true;
        for (std::size_t i = a; i < b; ++i) {
            if (std::abs((p.x[i + 1] - p.x[i]) - h) > 1e-9 * std::abs(h)) uniform = false;
        }
        double s = 0.0;
        if (uniform && m % 2 == 0) {
            for (std::size_t i = a; i < b; i += 2) s += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        } else {
            for (std::size_t i = a; i < b; ++i) s += 0.5 * (p.x[i + 1] - p.x[i]) * (f[i] + f[i + 1]);
        }
        return s;
    };

    std::size_t zero = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(p.x[i]) <= 1e-12 * p.l0) zero = i;
    }
    GammaResult r;
    r.value = zero < n ? piece(0, zero) + piece(zero, n - 1) : piece(0, n - 1);
    double max_h = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) max_h = std::max(max_h, p.x[i + 1] - p.x[i]);
    r.under_resolved = max_h > p.l0 / 40.0 * (1.0 + 1e-9);
    return r;
}

Profile1D profile_second_order(double l0, double chi, int points_per_l0)
{
    if (!(l0 > 0)) throw std::invalid_argument("l0 must be positive");
    if (chi != 0.0 && chi != 2.0) throw std::invalid_argument("closed-form second-order profiles exist for chi in {0, 2}");
    if (points_per_l0 < 1) throw std::invalid_argument("points_per_l0 must be positive");

    Profile1D p;
    p.l0 = l0;
    p.chi = chi;
    p.order = ModelOrder::Second;
    const int half = static_cast<int>(std::ceil(4.0 * std::numbers::pi * points_per_l0 / 2.0)) * 2;
    const double L = 4.0 * std::numbers::pi * l0;
    for (int i = -half; i <= half; ++i) {
        const double x = L * i / half;
        const double t = std::abs(x) / l0;
        const double sgn = x < 0 ? -1.0 : 1.0;
        double phi, d1, d2;
        if (chi == 2.0) {
            if (t <= std::numbers::pi / 2) {
                phi = 1.0 - std::sin(t);
                d1 = -sgn * std::cos(t) / l0;
                d2 = std::sin(t) / (l0 * l0);
            } else {
                phi = d1 = d2 = 0.0;
            }
        } else {
            phi = std::exp(-t);
            d1 = -sgn * phi / l0;
            d2 = phi / (l0 * l0);
        }
        p.x.push_back(x);
        p.phi.push_back(phi);
        // At the kink x = 0 the right-hand derivative is stored; |phi'| is
        // the same from both sides, which is what the density needs.
        p.dphi.push_back(d1);
        p.d2phi.push_back(d2);
    }
    p.gamma = gamma_integral(p).value;
    return p;
}

Profile1D profile_fourth_order(double l0, double chi, const FourthOrderOptions& opt)
{
    if (!(l0 > 0)) throw std::invalid_argument("l0 must be positive");
    if (!(chi >= 0.0 && chi <= 2.0)) throw std::invalid_argument("chi must lie in [0, 2]");
    if (opt.half_length_factor < 4.0 * std::numbers::pi - 1e-12) {
        throw std::invalid_argument("half length must be at least 4 pi l0");
    }
    const double L = opt.half_length_factor * l0;
    const int spans = static_cast<int>(std::ceil(opt.half_length_factor * opt.spans_per_l0));
    const auto kv = KnotVector::uniform(3, spans, 0.0, L);
    const int n = kv.num_basis();
    const double ca = c_alpha_for(chi);
    const auto rule = gauss_rule(4);

    // Quadratic energy E(c) = 1/2 c^T A c - b^T c (banded).
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    const double ad2 = 2.0 * (1.0 - chi);
    for (int s : kv.nonempty_spans()) {
        const double x0 = kv.knots()[s], x1 = kv.knots()[s + 1];
        for (int q = 0; q < 4; ++q) {
            const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * rule.points[q];
            const double w = 0.5 * (x1 - x0) * rule.weights[q];
            const auto bd = basis_and_derivs(kv, x, 2);
            for (int i = 0; i <= 3; ++i) {
                const int I = s - 3 + i;
                b[I] -= w * chi / (l0 * ca) * bd.values[i];
                for (int j = 0; j <= 3; ++j) {
                    trip.emplace_back(I, s - 3 + j,
                                      w / ca *
                                          (ad2 / l0 * bd.values[i] * bd.values[j] + l0 * bd.d1[i] * bd.d1[j] +
                                           l0 * l0 * l0 / 8.0 * bd.d2[i] * bd.d2[j]));
                }
            }
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());

    // c0 = c1 = 1 enforce phi(0) = 1 and phi'(0) = 0. For chi > 0 the
    // functional is unbounded without 0 <= phi <= 1 and the free-set Hessian
    // turns indefinite once the support exceeds roughly 2 l0, so the support
    // [0, R] is searched explicitly: for every prefix of free coefficients the
    // Euler-Lagrange system is solved (one Newton step, the energy being
    // quadratic) and the admissible candidate of least energy is kept.
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
    fixed[0] = fixed[1] = 1.0;
    const Eigen::VectorXd rhs_all = b - A * fixed;
    auto energy = [&](const Eigen::VectorXd& c) { return 0.5 * c.dot(A * c) - b.dot(c); };

    std::ostringstream trace;
    Eigen::VectorXd best;
    double best_e = std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (int k = 1; k <= n - 2; ++k) {
        const Eigen::SparseMatrix<double> Aff = A.block(2, 2, k, k);
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Aff);
        if (llt.info() != Eigen::Success) {
            trace << "support of " << k << " free coefficients: free Hessian indefinite, stop\n";
            break;
        }
        const Eigen::VectorXd cf = llt.solve(rhs_all.segment(2, k));
        Eigen::VectorXd c = fixed;
        c.segment(2, k) = cf;
        const bool admissible = cf.minCoeff() >= -1e-9 && cf.maxCoeff() <= 1.0 + 1e-9;
        if (!admissible) continue;
        const double e = energy(c);
        if (e < best_e) {
            best_e = e;
            best = c;
            best_k = k;
        }
    }
    if (best_k < 0) throw OracleError("1D minimization found no admissible profile:\n" + trace.str());

    // First-order optimality on the zero coefficients.
    const Eigen::VectorXd grad = A * best - b;
    const double gscale = rhs_all.cwiseAbs().maxCoeff();
    for (int i = 2 + best_k; i < n; ++i) {
        if (grad[i] < -1e-6 * gscale) {
            trace << "best support " << best_k << " coefficients, multiplier " << grad[i] << " at " << i << "\n";
            throw OracleError("1D minimizer violates the optimality conditions:\n" + trace.str());
        }
    }
    const Eigen::VectorXd c = best;

    auto eval = [&](double x) {
        const auto bd = basis_and_derivs(kv, x, 2);
        double v = 0, d1 = 0, d2 = 0;
        for (int i = 0; i <= 3; ++i) {
            const double ci = c[bd.span - 3 + i];
            v += ci * bd.values[i];
            d1 += ci * bd.d1[i];
            d2 += ci * bd.d2[i];
        }
        return std::array<double, 3>{v, d1, d2};
    };

    Profile1D p;
    p.l0 = l0;
    p.chi = chi;
    p.order = ModelOrder::Fourth;
    double half_gamma = 0.0;
    for (int s : kv.nonempty_spans()) {
        const double x0 = kv.knots()[s], x1 = kv.knots()[s + 1];
        for (int q = 0; q < 4; ++q) {
            const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * rule.points[q];
            const auto v = eval(x);
            half_gamma += 0.5 * (x1 - x0) * rule.weights[q] * crack_density(v[0], v[1], v[2], l0, chi, ModelOrder::Fourth);
        }
    }
    p.gamma = 2.0 * half_gamma;

    const int half = static_cast<int>(std::ceil(opt.half_length_factor * opt.samples_per_l0 / 2.0)) * 2;
    for (int i = -half; i <= half; ++i) {
        const double x = L * i / half;
        const auto v = eval(std::abs(x));
        p.x.push_back(x);
        p.phi.push_back(v[0]);
        p.dphi.push_back(x < 0 ? -v[1] : v[1]);
        p.d2phi.push_back(v[2]);
    }
    return p;
}

}  // namespace pf4
