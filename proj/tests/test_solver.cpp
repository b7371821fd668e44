#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "pf4/config.hpp"
#include "pf4/solver.hpp"
#include "pf4/verify.hpp"

using namespace pf4;

namespace {

// Two-element strip [0, 2] x [0, 1]: left edge fixed in x, origin fixed in y,
// right edge driven in x.
struct Strip {
    Mesh mesh = uniform_mesh(3, 2, 1, 2.0, 1.0);
    MaterialModel mat;
    BoundaryConditions bcs;

    explicit Strip(MaterialParams p = small_params()) : mat(p)
    {
        for (int cp : edge_control_points(mesh, Edge::Left, 0, 1))
            bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(cp), Field::Ux), 0.0, false});
        bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(0), Field::Uy), 0.0, false});
        for (int cp : edge_control_points(mesh, Edge::Right, 0, 1))
            bcs.dirichlet.push_back({mesh.dof(mesh.node_of_cp(cp), Field::Ux), 0.0, true});
    }

    static MaterialParams small_params()
    {
        MaterialParams p;
        p.l0 = 0.5;
        return p;
    }
};

RunConfig short_bar(int steps, double du = 2e-4)
{
    RunConfig c = tension_bar();
    c.schedule.max_steps = steps;
    c.schedule.du = du;
    return c;
}

}  // namespace

TEST_CASE("linear solve of the identity returns the right-hand side")
{
    SparseMatrix I(5, 5);
    I.setIdentity();
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(5, -2, 3);
    CHECK((linear_solve(I, b) - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear solve agrees with a dense LU on an elastic system")
{
    const Mesh m = uniform_mesh(2, 4, 3, 4, 3);
    MaterialModel mat;
    const Assembler as(m, mat, {});
    const auto sys = as.assemble(Eigen::VectorXd::Zero(m.num_u_dofs()), Eigen::VectorXd::Zero(m.num_nodes()),
                                 std::vector<QuadPointState>(m.num_qps(), fresh_state(mat)));
    std::vector<int> fixed;
    for (int cp : edge_control_points(m, Edge::Left, 0, 3)) {
        fixed.push_back(m.dof(m.node_of_cp(cp), Field::Ux));
        fixed.push_back(m.dof(m.node_of_cp(cp), Field::Uy));
    }
    for (int n = 0; n < m.num_nodes(); ++n) fixed.push_back(m.dof(n, Field::Phi));
    const auto c = condense(sys, fixed);
    REQUIRE(c.K.rows() <= 300);
    Eigen::VectorXd b(c.K.rows());
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    for (auto& v : b) v = N(rng);

    const Eigen::VectorXd x = linear_solve(c.K, b);
    const Eigen::MatrixXd Kd(c.K);
    const Eigen::VectorXd ref = Kd.partialPivLu().solve(b);
    CHECK((x - ref).norm() / ref.norm() <= 1e-10);
    CHECK((Kd * x - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("linear solver reuses its analysis and reports singular systems")
{
    LinearSolver s;
    SparseMatrix A(3, 3);
    A.insert(0, 0) = 4;
    A.insert(1, 1) = 2;
    A.insert(2, 2) = 1;
    A.insert(0, 2) = 1;
    A.makeCompressed();
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
    const auto x1 = s.solve(A, b);
    A.coeffRef(1, 1) = 8;
    const auto x2 = s.solve(A, b);
    CHECK(x1[1] == doctest::Approx(0.5));
    CHECK(x2[1] == doctest::Approx(0.125));

    SparseMatrix Z(2, 2);
    Z.insert(0, 0) = 1;
    Z.insert(1, 0) = 1;
    Z.makeCompressed();
    CHECK_THROWS_AS(linear_solve(Z, Eigen::VectorXd::Ones(2)), SolverError);
}

TEST_CASE("state already in equilibrium takes zero iterations")
{
    Strip s;
    const Assembler as(s.mesh, s.mat, s.bcs);
    LinearSolver ls;
    auto st = initial_state(s.mesh, s.mat);
    const auto r = newton_step(st, as, s.bcs, 0.0, {}, ls);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
}

TEST_CASE("elastic step converges in one iteration")
{
    Strip s;
    const Assembler as(s.mesh, s.mat, s.bcs);
    LinearSolver ls;
    auto st = initial_state(s.mesh, s.mat);
    const auto r = newton_step(st, as, s.bcs, 1e-5, {}, ls);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(st.phi.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Newton converges superlinearly near the solution")
{
    Strip s;
    const Assembler as(s.mesh, s.mat, s.bcs);
    LinearSolver ls;
    auto st = initial_state(s.mesh, s.mat);
    for (auto& q : st.states) q.H = 500.0 * s.mat.H0;  // damage is driven
    SolverSettings set;
    set.tol = 1e-12;
    const auto r = newton_step(st, as, s.bcs, 2e-4, set, ls);
    REQUIRE(r.converged);
    const auto& h = r.residual_history;
    REQUIRE(h.size() >= 4);
    for (std::size_t k = h.size() - 3; k < h.size(); ++k) CHECK(h[k] <= 0.5 * h[k - 1]);
    CHECK(st.phi.maxCoeff() > 0.01);
}

TEST_CASE("zero-step schedule yields an empty curve and the initial snapshot")
{
    const auto cfg = short_bar(0);
    const auto built = build_problem(cfg);
    int snaps = 0;
    Observer obs;
    obs.on_snapshot = [&](const SimState& st) {
        ++snaps;
        CHECK(st.step_index == 0);
    };
    const auto res = run_simulation(make_problem(cfg, built), obs);
    CHECK(res.curve.empty());
    CHECK(snaps == 1);
    CHECK_FALSE(res.failed);
}

TEST_CASE("elastic-limit run stays undamaged with a linear curve")
{
    // Largest applied displacement gives half the strength.
    const auto cfg = short_bar(6, 1e-3);
    const auto built = build_problem(cfg);
    const auto res = run_simulation(make_problem(cfg, built));
    REQUIRE(res.curve.size() == 6);
    CHECK(res.final_state.phi.cwiseAbs().maxCoeff() <= 1e-6);
    const double k0 = res.curve[0].reaction / res.curve[0].applied;
    for (const auto& row : res.curve) {
        CHECK(row.status == StepStatus::Converged);
        CHECK(std::abs(row.reaction / row.applied - k0) <= 1e-8 * std::abs(k0));
    }
    // Bar stiffness E A / L with A = 5 mm^2, L = 100 mm.
    CHECK(k0 == doctest::Approx(20000.0 * 5.0 / 100.0).epsilon(1e-6));
}

TEST_CASE("driven and support reactions balance")
{
    auto cfg = short_bar(120);
    cfg.solver.tol = 1e-9;
    const auto built = build_problem(cfg);
    const auto p = make_problem(cfg, built);
    const auto res = run_simulation(p);
    REQUIRE_FALSE(res.failed);
    REQUIRE(res.final_state.phi.maxCoeff() > 1e-4);

    const Assembler as(built.mesh, built.material, built.bcs);
    const auto sys = as.assemble(res.final_state.u, res.final_state.phi, res.final_state.states, false);
    double driven = 0, support = 0;
    for (const auto& d : built.bcs.dirichlet) {
        if (d.dof >= built.mesh.num_u_dofs() || d.dof % 2 != 0) continue;  // x components only
        (d.driven ? driven : support) += sys.r[d.dof];
    }
    CHECK(std::abs(driven + support) <= 1e-6 * std::abs(driven));
    CHECK(driven_reaction(sys, built.bcs, p.thickness) == doctest::Approx(driven * p.thickness));
    CHECK(res.curve.back().reaction == doctest::Approx(driven * p.thickness).epsilon(1e-12));
}

TEST_CASE("step halving is recorded and failure stops gracefully")
{
    auto cfg = short_bar(30, 1e-3);
    cfg.solver.history = HistoryMode::PerIteration;
    cfg.solver.max_iter = 5;
    const auto built = build_problem(cfg);
    const auto res = run_simulation(make_problem(cfg, built));
    int halved = 0;
    for (std::size_t i = 0; i < res.curve.size(); ++i) {
        const auto& r = res.curve[i];
        CHECK(r.step == static_cast<int>(i) + 1);
        if (i > 0) CHECK(r.applied > res.curve[i - 1].applied);
        if (r.status == StepStatus::Halved) {
            ++halved;
            const double units = r.applied / (1e-3 / 16);
            CHECK(std::abs(units - std::round(units)) <= 1e-6);
        }
    }
    CHECK(halved > 0);
    if (res.failed) {
        CHECK(res.curve.back().status == StepStatus::Failed);
        CHECK(std::isnan(res.curve.back().reaction));
    }
}

TEST_CASE("history and damage never decrease across accepted steps")
{
    const auto cfg = short_bar(80);
    const auto built = build_problem(cfg);
    const Assembler as(built.mesh, built.material, built.bcs);
    std::vector<double> prevH;
    double prev_max = -1;
    int checked = 0;
    Observer obs;
    obs.snapshot_interval = 1;
    obs.on_snapshot = [&](const SimState& st) {
        std::vector<double> H;
        for (const auto& q : st.states) H.push_back(q.H);
        if (!prevH.empty()) {
            for (std::size_t i = 0; i < H.size(); ++i) CHECK(H[i] >= prevH[i]);
        }
        const double m = as.phase_at_qps(st.phi).maxCoeff();
        CHECK(m >= prev_max - 1e-6);
        prevH = H;
        prev_max = m;
        ++checked;
    };
    const auto res = run_simulation(make_problem(cfg, built), obs);
    CHECK(checked == static_cast<int>(res.curve.size()) + 1);
    CHECK(prev_max > 0.0);
}

TEST_CASE("identical runs give bitwise identical curves")
{
    const auto cfg = short_bar(70);
    const auto built = build_problem(cfg);
    const auto a = run_simulation(make_problem(cfg, built, 1));
    const auto b = run_simulation(make_problem(cfg, built, 3));
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].applied == b.curve[i].applied);
        CHECK(a.curve[i].reaction == b.curve[i].reaction);
        CHECK(a.curve[i].iterations == b.curve[i].iterations);
    }
}

TEST_CASE("invalid schedules are rejected")
{
    auto cfg = short_bar(3);
    const auto built = build_problem(cfg);
    auto p = make_problem(cfg, built);
    p.schedule.du = 0.0;
    CHECK_THROWS(run_simulation(p));
    CHECK(to_string(StepStatus::Halved) == "halved");
}
