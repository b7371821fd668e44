#include "pf4/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pf4/oracle1d.hpp"
#include "pf4/solver.hpp"

namespace pf4 {

namespace {

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

}  // namespace

Mesh uniform_mesh(int degree, int nx, int ny, double lx, double ly)
{
    MeshSpec s;
    s.degree = degree;
    s.lx = lx;
    s.ly = ly;
    s.coarse_hx = lx / nx;
    s.coarse_hy = ly / ny;
    return build_mesh(s);
}

CheckResult check_degradation_reduction()
{
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double phi = i * 1e-3;
        const double g = degradation_fn(phi, 2.0, 2.0, -0.5, 0.0).g;
        worst = std::max(worst, std::abs(g - (1.0 - phi) * (1.0 - phi)));
    }
    return {"degradation reduces to (1-phi)^2", worst <= 1e-12, "max |g - (1-phi)^2| = " + sci(worst)};
}

CheckResult check_c_alpha()
{
    const double e2 = std::abs(c_alpha_for(2.0) - std::numbers::pi);
    const double e0 = std::abs(c_alpha_for(0.0) - 2.0);
    // The quadrature branch must agree with the closed forms near the end points.
    const double n2 = std::abs(c_alpha_for(2.0 - 1e-9) - std::numbers::pi);
    const double n0 = std::abs(c_alpha_for(1e-9) - 2.0);
    const bool ok = e2 <= 1e-10 && e0 <= 1e-10 && n2 <= 1e-7 && n0 <= 1e-7;
    return {"c_alpha normalization", ok,
            "|c(2)-pi| = " + sci(e2) + ", |c(0)-2| = " + sci(e0) + ", near-end quadrature " + sci(std::max(n0, n2))};
}

GammaBaseline measure_gamma()
{
    GammaBaseline b;
    b.second_chi2 = profile_second_order(1.0, 2.0).gamma;
    b.second_chi0 = profile_second_order(1.0, 0.0).gamma;
    FourthOrderOptions coarse, fine;
    coarse.spans_per_l0 = 20;
    fine.spans_per_l0 = 40;
    const double c2 = profile_fourth_order(1.0, 2.0, coarse).gamma;
    const double f2 = profile_fourth_order(1.0, 2.0, fine).gamma;
    const double c0 = profile_fourth_order(1.0, 0.0, coarse).gamma;
    const double f0 = profile_fourth_order(1.0, 0.0, fine).gamma;
    b.gamma_chi2 = f2;
    b.gamma_chi0 = f0;
    b.change_chi2 = std::abs(f2 - c2) / std::abs(f2);
    b.change_chi0 = std::abs(f0 - c0) / std::abs(f0);
    return b;
}

CheckResult check_gamma_1d()
{
    const auto b = measure_gamma();
    const bool ok = std::abs(b.second_chi2 - 1.0) <= 1e-6 && std::abs(b.second_chi0 - 1.0) <= 1e-6 &&
                    b.change_chi2 < 1e-3 && b.change_chi0 < 1e-3;
    std::ostringstream os;
    os.precision(10);
    os << "second order: " << b.second_chi2 << " (chi=2), " << b.second_chi0 << " (chi=0); fourth order: "
       << b.gamma_chi2 << " (chi=2, change " << sci(b.change_chi2) << "), " << b.gamma_chi0 << " (chi=0, change "
       << sci(b.change_chi0) << ")";
    return {"1D regularized crack length", ok, os.str()};
}

CheckResult check_rest_equilibrium()
{
    double worst = 0.0;
    std::vector<Mesh> meshes;
    meshes.push_back(uniform_mesh(3, 3, 3, 3.0, 3.0));
    meshes.push_back(uniform_mesh(2, 5, 2, 50.0, 10.0));
    {
        MeshSpec s;
        s.degree = 3;
        s.lx = 100.0;
        s.ly = 40.0;
        s.coarse_hx = 10.0;
        s.coarse_hy = 5.0;
        s.bands = {{Axis::X, 45.0, 55.0, 1.25}};
        s.lines_x = {47.5, 52.5};
        s.lines_y = {20.0};
        meshes.push_back(build_mesh(s));
        apply_notch(meshes.back(), {47.5, 52.5, 0.0, 20.0});
    }
    for (Softening law : {Softening::Linear, Softening::Exponential, Softening::Hyperbolic, Softening::Cornelissen}) {
        for (ModelOrder order : {ModelOrder::Second, ModelOrder::Fourth}) {
            MaterialParams p;
            p.softening = law;
            p.order = order;
            const MaterialModel mat(p);
            for (const auto& mesh : meshes) {
                const Assembler as(mesh, mat, BoundaryConditions{}, HistoryMode::PerStep, 1);
                const auto st = initial_state(mesh, mat);
                const auto sys = as.assemble(st.u, st.phi, st.states, false);
                worst = std::max(worst, sys.r.lpNorm<Eigen::Infinity>());
            }
        }
    }
    return {"equilibrium at rest", worst <= 1e-12, "max |r| = " + sci(worst)};
}

TangentErrors tangent_fd_errors(const Mesh& mesh, const MaterialModel& mat, HistoryMode mode, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const int nu = mesh.num_u_dofs(), np = mesh.num_nodes();
    const double size = std::max(mesh.patch().kv_xi().back() - mesh.patch().kv_xi().front(),
                                 mesh.patch().kv_eta().back() - mesh.patch().kv_eta().front());
    const double eps_scale = 3.0 * mat.params.ft / mat.params.E0;

    Eigen::VectorXd u(nu), phi(np);
    for (int i = 0; i < nu; ++i) u[i] = eps_scale * size * U(rng);
    for (int i = 0; i < np; ++i) phi[i] = 0.3 + 0.25 * U(rng);
    std::vector<QuadPointState> states(mesh.num_qps(), fresh_state(mat));
    const double H0 = std::max(mat.H0, 1e-6);
    for (auto& s : states) s.H = H0 * (3.0 + 2.0 * U(rng));

    const Assembler as(mesh, mat, BoundaryConditions{}, mode, 1);
    const auto sys = as.assemble(u, phi, states, true);
    const Eigen::MatrixXd K(sys.K);
    Eigen::MatrixXd F(nu + np, nu + np);
    const double du = 1e-6 * eps_scale * size, dp = 1e-6;
    for (int j = 0; j < nu + np; ++j) {
        Eigen::VectorXd up = u, um = u, pp = phi, pm = phi;
        double h;
        if (j < nu) {
            up[j] += du;
            um[j] -= du;
            h = du;
        } else {
            pp[j - nu] += dp;
            pm[j - nu] -= dp;
            h = dp;
        }
        const auto rp = as.assemble(up, pp, states, false).r;
        const auto rm = as.assemble(um, pm, states, false).r;
        F.col(j) = (rp - rm) / (2.0 * h);
    }
    const double kmax = K.cwiseAbs().maxCoeff();
    auto err = [&](int r0, int c0, int nr, int nc) {
        const double d = (K.block(r0, c0, nr, nc) - F.block(r0, c0, nr, nc)).cwiseAbs().maxCoeff();
        const double scale = std::max(K.block(r0, c0, nr, nc).cwiseAbs().maxCoeff(), 1e-8 * kmax);
        return d / scale;
    };
    TangentErrors e;
    e.uu = err(0, 0, nu, nu);
    e.uphi = err(0, nu, nu, np);
    e.phiu = err(nu, 0, np, nu);
    e.phiphi = err(nu, nu, np, np);
    return e;
}

CheckResult check_tangent_fd(int states)
{
    const Mesh mesh = uniform_mesh(3, 3, 3, 3.0, 3.0);
    const MaterialModel mat{MaterialParams{}};
    TangentErrors worst;
    for (int k = 0; k < states; ++k) {
        const auto e = tangent_fd_errors(mesh, mat, HistoryMode::PerStep, 1000 + k);
        worst.uu = std::max(worst.uu, e.uu);
        worst.uphi = std::max(worst.uphi, e.uphi);
        worst.phiu = std::max(worst.phiu, e.phiu);
        worst.phiphi = std::max(worst.phiphi, e.phiphi);
    }
    const double m = std::max({worst.uu, worst.uphi, worst.phiu, worst.phiphi});
    return {"tangent blocks vs central differences", m <= 1e-5,
            "uu " + sci(worst.uu) + ", uphi " + sci(worst.uphi) + ", phiu " + sci(worst.phiu) + ", phiphi " +
                sci(worst.phiphi)};
}

CheckResult check_patch_test()
{
    const double L = 10.0, Hh = 5.0;
    const Mesh mesh = uniform_mesh(3, 1, 1, L, Hh);
    const MaterialModel mat{MaterialParams{}};
    const double delta = 0.5 * mat.params.ft / mat.params.E0 * L;

    BoundaryConditions bcs;
    for (int cp : edge_control_points(mesh, Edge::Left, 0.0, Hh)) bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(cp), Field::Ux), 0.0, false});
    for (int cp : edge_control_points(mesh, Edge::Right, 0.0, Hh)) bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(cp), Field::Ux), 0.0, true});
    bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(0), Field::Uy), 0.0, false});

    const Assembler as(mesh, mat, bcs, HistoryMode::PerStep, 1);
    SimState st = initial_state(mesh, mat);
    LinearSolver solver;
    const auto nr = newton_step(st, as, bcs, delta, SolverSettings{}, solver);

    double err = 0.0, scale = 0.0;
    for (int node = 0; node < mesh.num_nodes(); ++node) {
        const auto& x = mesh.patch().control_points()[mesh.cp_of_node(node)];
        const double ux = delta * x.x() / L;
        const double uy = -mat.params.nu * delta * x.y() / L;
        err = std::max({err, std::abs(st.u[2 * node] - ux), std::abs(st.u[2 * node + 1] - uy)});
        scale = std::max({scale, std::abs(ux), std::abs(uy)});
    }
    const double rel = err / scale;
    const double phimax = st.phi.cwiseAbs().maxCoeff();
    const bool ok = nr.converged && rel <= 1e-10 && phimax <= 1e-12;
    return {"single-element uniaxial patch test", ok,
            "rel. displacement error " + sci(rel) + ", max |phi| " + sci(phimax) + ", iterations " +
                std::to_string(nr.iterations)};
}

CheckResult check_energy_split(int samples)
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double e_energy = 0.0, e_strain = 0.0;
    for (StressState ss : {StressState::PlaneStress, StressState::PlaneStrain}) {
        MaterialParams p;
        p.stress_state = ss;
        const MaterialModel mat(p);
        for (int k = 0; k < samples; ++k) {
            Eigen::Matrix2d eps;
            const double s = 1e-3 * std::pow(10.0, 2.0 * U(rng));
            eps(0, 0) = s * U(rng);
            eps(1, 1) = s * U(rng);
            eps(0, 1) = eps(1, 0) = s * U(rng);
            const auto sp = split_strain(eps);
            const auto es = energy_split(eps, mat);
            const double full = elastic_energy(eps, mat);
            e_energy = std::max(e_energy, std::abs(es.plus + es.minus - full) / full);
            e_strain = std::max(e_strain, (sp.plus + sp.minus - eps).cwiseAbs().maxCoeff() / eps.cwiseAbs().maxCoeff());
        }
    }
    return {"energy split exactness", e_energy <= 1e-10 && e_strain <= 1e-12,
            "energy " + sci(e_energy) + ", strain " + sci(e_strain)};
}

CheckResult check_splines()
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double pou = 0.0, dfd = 0.0, ins = 0.0;
    for (int p = 2; p <= 4; ++p) {
        std::vector<double> br = {0.0, 0.13, 0.4, 0.41, 0.77, 1.0};
        const auto kv = KnotVector::from_breaks(p, br);
        for (int k = 0; k < 200; ++k) {
            const double x = U(rng);
            const auto b = basis_and_derivs(kv, x, 2);
            double s = 0, s1 = 0, s2 = 0;
            for (int i = 0; i <= p; ++i) {
                s += b.values[i];
                s1 += b.d1[i];
                s2 += b.d2[i];
            }
            pou = std::max({pou, std::abs(s - 1.0), std::abs(s1), std::abs(s2)});
            const double h = 1e-6;
            if (x > 2 * h && x < 1 - 2 * h) {
                const auto bp = basis_and_derivs(kv, x + h, 0), bm = basis_and_derivs(kv, x - h, 0);
                if (bp.span == b.span && bm.span == b.span) {
                    for (int i = 0; i <= p; ++i) {
                        dfd = std::max(dfd, std::abs((bp.values[i] - bm.values[i]) / (2 * h) - b.d1[i]) /
                                                std::max(1.0, std::abs(b.d1[i])));
                    }
                }
            }
        }
        const auto patch = SplinePatch::rectangle(kv, KnotVector::uniform(p, 3), 0.0, 0.0, 2.0, 1.0);
        const auto refined = insert_knot(insert_knot(patch, Direction::Xi, 0.55), Direction::Eta, 0.2);
        for (int k = 0; k < 50; ++k) {
            const double a = U(rng), b2 = U(rng);
            ins = std::max(ins, (patch.point(a, b2) - refined.point(a, b2)).norm());
        }
    }
    const bool ok = pou <= 1e-12 && dfd <= 1e-6 && ins <= 1e-12;
    return {"spline basis invariants", ok,
            "partition of unity " + sci(pou) + ", derivative FD " + sci(dfd) + ", knot insertion " + sci(ins)};
}

std::vector<CheckResult> verify_suite()
{
    std::vector<CheckResult> out;
    out.push_back(check_splines());
    out.push_back(check_degradation_reduction());
    out.push_back(check_c_alpha());
    out.push_back(check_energy_split());
    out.push_back(check_gamma_1d());
    out.push_back(check_rest_equilibrium());
    out.push_back(check_tangent_fd(2));
    out.push_back(check_patch_test());
    return out;
}

}  // namespace pf4
