#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "pf4/assembly.hpp"
#include "pf4/verify.hpp"

using namespace pf4;

namespace {

MaterialModel model(Softening s = Softening::Cornelissen, ModelOrder o = ModelOrder::Fourth)
{
    MaterialParams p;
    p.softening = s;
    p.order = o;
    p.l0 = 0.5;
    return MaterialModel(p);
}

std::vector<QuadPointState> fresh(const Mesh& m, const MaterialModel& mat)
{
    return std::vector<QuadPointState>(m.num_qps(), fresh_state(mat));
}

BoundaryConditions no_bcs() { return {}; }

struct RandomState {
    Eigen::VectorXd u, phi;
    std::vector<QuadPointState> states;
};

RandomState random_state(const Mesh& m, const MaterialModel& mat, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0), P(0.05, 0.95);
    RandomState s;
    s.u.resize(m.num_u_dofs());
    for (auto& v : s.u) v = 1e-3 * U(rng);
    s.phi.resize(m.num_nodes());
    for (auto& v : s.phi) v = P(rng);
    s.states = fresh(m, mat);
    for (auto& q : s.states) q.H = mat.H0 * (1.0 + 5.0 * P(rng));
    return s;
}

Eigen::MatrixXd dense(const SparseMatrix& K) { return Eigen::MatrixXd(K); }

}  // namespace

TEST_CASE("element kernels follow Voigt order and the Laplacian definition")
{
    const Mesh m = uniform_mesh(3, 1, 1, 2, 1);
    const auto& q = m.elements()[0].qps[3];
    const auto k = element_kernels(q);
    const auto n = q.N.size();
    REQUIRE(k.Bu.rows() == 3);
    REQUIRE(k.Bu.cols() == 2 * n);
    for (Eigen::Index a = 0; a < n; ++a) {
        CHECK(k.Bu(0, 2 * a) == q.dNdx[a]);
        CHECK(k.Bu(1, 2 * a + 1) == q.dNdy[a]);
        CHECK(k.Bu(2, 2 * a) == q.dNdy[a]);
        CHECK(k.Bu(2, 2 * a + 1) == q.dNdx[a]);
        CHECK(k.Bphi(0, a) == q.dNdx[a]);
        CHECK(k.Dphi[a] == q.lap[a]);
    }
}

TEST_CASE("zero state at rest: cohesive residual vanishes, brittle does not")
{
    const Mesh m = uniform_mesh(3, 2, 2, 2, 2);
    const auto& el = m.elements()[0];
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    const Eigen::VectorXd ue = Eigen::VectorXd::Zero(2 * n), pe = Eigen::VectorXd::Zero(n);

    const auto czm = model();
    auto sc = fresh(m, czm);
    const auto rc = element_residuals(el, ue, pe, sc.data(), czm);
    CHECK(rc.ru.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rc.rphi.cwiseAbs().maxCoeff() <= 1e-12);

    // With the H0 floor forced on, a brittle material is driven to damage.
    const auto br = model(Softening::Brittle);
    std::vector<QuadPointState> sb(m.num_qps(), QuadPointState{czm.H0, Eigen::Matrix2d::Zero()});
    const auto rb = element_residuals(el, ue, pe, sb.data(), br);
    CHECK(rb.rphi.maxCoeff() < 0.0);
    // Without the floor (the brittle default) the rest state is in equilibrium.
    auto sb0 = fresh(m, br);
    CHECK(element_residuals(el, ue, pe, sb0.data(), br).rphi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant phase field: only local terms survive")
{
    const Mesh m = uniform_mesh(3, 1, 1, 1, 1);
    const auto& el = m.elements()[0];
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    const auto mat = model();
    auto st = fresh(m, mat);
    const double c = 0.3;
    const Eigen::VectorXd pe = Eigen::VectorXd::Constant(n, c);
    const auto r = element_residuals(el, Eigen::VectorXd::Zero(2 * n), pe, st.data(), mat);

    const double local = mat.params.Gc / (mat.c_alpha * mat.params.l0) * geometric_fn(c, mat.chi).d1 +
                         degradation_fn(c, mat).d1 * mat.H0;
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(n);
    for (const auto& q : el.qps) expect += q.weight * local * q.N;
    CHECK((r.rphi - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("undamaged displacement block equals elastic stiffness")
{
    const Mesh m = uniform_mesh(2, 1, 1, 3, 2);
    const auto& el = m.elements()[0];
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    const auto mat = model();
    auto st = fresh(m, mat);
    const auto t = element_tangents(el, Eigen::VectorXd::Zero(2 * n), Eigen::VectorXd::Zero(n), st.data(), mat);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (const auto& q : el.qps) {
        const auto k = element_kernels(q);
        K += q.weight * k.Bu.transpose() * mat.elasticity_matrix() * k.Bu;
    }
    CHECK((t.uu - K).cwiseAbs().maxCoeff() <= 1e-10 * K.cwiseAbs().maxCoeff());
}

TEST_CASE("Laplacian Gram block is positive semidefinite")
{
    const Mesh m = uniform_mesh(3, 1, 1, 1, 1);
    const auto& el = m.elements()[0];
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (const auto& q : el.qps) G += q.weight * q.lap * q.lap.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
}

TEST_CASE("element tangents match central differences")
{
    const Mesh m = uniform_mesh(3, 3, 3, 1.5, 1.5);
    for (auto order : {ModelOrder::Fourth, ModelOrder::Second}) {
        for (auto law : {Softening::Cornelissen, Softening::Linear, Softening::Brittle}) {
            const auto mat = model(law, order);
            const auto e = tangent_fd_errors(m, mat, HistoryMode::PerStep, 42);
            CHECK(e.uu <= 1e-5);
            CHECK(e.uphi <= 1e-5);
            CHECK(e.phiu <= 1e-5);
            CHECK(e.phiphi <= 1e-5);
        }
    }
}

TEST_CASE("per-iteration history tangent matches central differences")
{
    const Mesh m = uniform_mesh(3, 2, 2, 1, 1);
    const auto e = tangent_fd_errors(m, model(), HistoryMode::PerIteration, 9);
    CHECK(e.uu <= 1e-5);
    CHECK(e.uphi <= 1e-5);
    CHECK(e.phiu <= 1e-5);
    CHECK(e.phiphi <= 1e-5);
}

TEST_CASE("directional derivatives over random directions")
{
    const Mesh m = uniform_mesh(3, 3, 3, 1.5, 1.5);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto s = random_state(m, mat, 77);
    const auto sys = as.assemble(s.u, s.phi, s.states);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    const int nu = m.num_u_dofs();
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd du(nu), dp(m.num_nodes());
        for (auto& v : du) v = 1e-3 * N(rng);
        for (auto& v : dp) v = N(rng);
        const double h = 1e-6;
        const auto p = as.assemble(s.u + h * du, s.phi + h * dp, s.states, false);
        const auto q = as.assemble(s.u - h * du, s.phi - h * dp, s.states, false);
        const Eigen::VectorXd fd = (p.r - q.r) / (2 * h);
        Eigen::VectorXd d(nu + m.num_nodes());
        d << du, dp;
        const Eigen::VectorXd an = sys.K * d;
        CHECK((fd - an).cwiseAbs().maxCoeff() <= 1e-5 * an.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("assembled blocks: symmetry and coupling asymmetry")
{
    const Mesh m = uniform_mesh(3, 3, 2, 1.5, 1.0);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto s = random_state(m, mat, 3);
    const auto sys = as.assemble(s.u, s.phi, s.states);
    const auto uu = dense(sys.K_uu()), pp = dense(sys.K_phiphi());
    CHECK((uu - uu.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * uu.cwiseAbs().maxCoeff());
    CHECK((pp - pp.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * pp.cwiseAbs().maxCoeff());
    const auto up = dense(sys.K_uphi()), pu = dense(sys.K_phiu());
    CHECK(up.cwiseAbs().maxCoeff() > 0.0);
    CHECK(pu.cwiseAbs().maxCoeff() == 0.0);  // frozen history
    CHECK((up - pu.transpose()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("global matrix equals the dense sum of scattered element blocks")
{
    const Mesh m = uniform_mesh(3, 2, 1, 2, 1);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto s = random_state(m, mat, 8);
    const auto sys = as.assemble(s.u, s.phi, s.states);
    const int nu = m.num_u_dofs(), nd = m.num_dofs();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nd, nd);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nd);
    for (std::size_t e = 0; e < m.elements().size(); ++e) {
        const auto& el = m.elements()[e];
        const auto ud = m.element_u_dofs(el), pd = m.element_phi_dofs(el);
        Eigen::VectorXd ue(ud.size()), pe(pd.size());
        for (std::size_t i = 0; i < ud.size(); ++i) ue[i] = s.u[ud[i]];
        for (std::size_t i = 0; i < pd.size(); ++i) pe[i] = s.phi[pd[i] - nu];
        const auto* st = s.states.data() + m.qp_offset(static_cast<int>(e));
        const auto t = element_tangents(el, ue, pe, st, mat);
        const auto re = element_residuals(el, ue, pe, st, mat);
        for (std::size_t i = 0; i < ud.size(); ++i) {
            r[ud[i]] += re.ru[i];
            for (std::size_t j = 0; j < ud.size(); ++j) K(ud[i], ud[j]) += t.uu(i, j);
            for (std::size_t j = 0; j < pd.size(); ++j) K(ud[i], pd[j]) += t.uphi(i, j);
        }
        for (std::size_t i = 0; i < pd.size(); ++i) {
            r[pd[i]] += re.rphi[i];
            for (std::size_t j = 0; j < pd.size(); ++j) K(pd[i], pd[j]) += t.phiphi(i, j);
            for (std::size_t j = 0; j < ud.size(); ++j) K(pd[i], ud[j]) += t.phiu(i, j);
        }
    }
    CHECK((dense(sys.K) - K).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff());
    CHECK((sys.r - r).cwiseAbs().maxCoeff() <= 1e-12 * r.cwiseAbs().maxCoeff());
}

TEST_CASE("zero state without load has zero global residual")
{
    Mesh m = uniform_mesh(3, 4, 2, 4, 2);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto sys = as.assemble(Eigen::VectorXd::Zero(m.num_u_dofs()), Eigen::VectorXd::Zero(m.num_nodes()), fresh(m, mat));
    CHECK(sys.r.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("residual is the derivative of the discrete energy")
{
    const Mesh m = uniform_mesh(3, 2, 2, 1, 1);
    for (auto order : {ModelOrder::Fourth, ModelOrder::Second}) {
        const auto mat = model(Softening::Cornelissen, order);
        const Assembler as(m, mat, no_bcs());
        const auto s = random_state(m, mat, 21);
        const auto sys = as.assemble(s.u, s.phi, s.states, false);
        auto energy = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& p) {
            return as.displacement_energy(u, p) + as.phase_energy(p, s.states);
        };
        std::mt19937_64 rng(2);
        std::normal_distribution<double> N;
        for (int k = 0; k < 5; ++k) {
            Eigen::VectorXd du(m.num_u_dofs()), dp(m.num_nodes());
            for (auto& v : du) v = 1e-3 * N(rng);
            for (auto& v : dp) v = 0.1 * N(rng);
            const double h = 1e-5;
            const double fd = (energy(s.u + h * du, s.phi + h * dp) - energy(s.u - h * du, s.phi - h * dp)) / (2 * h);
            const double an = sys.r_u().dot(du) + sys.r_phi().dot(dp);
            CHECK(fd == doctest::Approx(an).epsilon(1e-5));
        }
    }
}

TEST_CASE("bound penalty enters residual and energy consistently")
{
    const Mesh m = uniform_mesh(3, 2, 2, 1, 1);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    auto s = random_state(m, mat, 4);
    for (Eigen::Index i = 0; i < s.phi.size(); ++i) s.phi[i] = (i % 3 == 0) ? 1.02 : (i % 3 == 1 ? -0.01 : 0.5);
    const auto sys = as.assemble(s.u, s.phi, s.states, false);
    Eigen::VectorXd dp = Eigen::VectorXd::LinSpaced(m.num_nodes(), -1, 1);
    const double h = 1e-7;
    const double fd = (as.phase_energy(s.phi + h * dp, s.states) - as.phase_energy(s.phi - h * dp, s.states)) / (2 * h);
    CHECK(fd == doctest::Approx(sys.r_phi().dot(dp)).epsilon(1e-5));
}

TEST_CASE("assembly is deterministic across thread counts")
{
    const Mesh m = uniform_mesh(3, 4, 4, 2, 2);
    const auto mat = model();
    const auto s = random_state(m, mat, 12);
    const Assembler a1(m, mat, no_bcs(), HistoryMode::PerStep, 1);
    const Assembler a4(m, mat, no_bcs(), HistoryMode::PerStep, 4);
    const auto x = a1.assemble(s.u, s.phi, s.states);
    const auto y = a4.assemble(s.u, s.phi, s.states);
    const auto z = a4.assemble(s.u, s.phi, s.states);
    REQUIRE(x.K.nonZeros() == y.K.nonZeros());
    CHECK(std::equal(x.K.valuePtr(), x.K.valuePtr() + x.K.nonZeros(), y.K.valuePtr()));
    CHECK(std::equal(y.K.valuePtr(), y.K.valuePtr() + y.K.nonZeros(), z.K.valuePtr()));
    CHECK(x.r == y.r);
    CHECK(y.r == z.r);
}

TEST_CASE("sparsity pattern does not depend on the state")
{
    const Mesh m = uniform_mesh(3, 3, 3, 1, 1);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto zero = as.assemble(Eigen::VectorXd::Zero(m.num_u_dofs()), Eigen::VectorXd::Zero(m.num_nodes()), fresh(m, mat));
    const auto s = random_state(m, mat, 5);
    const auto rnd = as.assemble(s.u, s.phi, s.states);
    REQUIRE(zero.K.nonZeros() == rnd.K.nonZeros());
    CHECK(std::equal(zero.K.innerIndexPtr(), zero.K.innerIndexPtr() + zero.K.nonZeros(), rnd.K.innerIndexPtr()));
}

TEST_CASE("condensation drops constrained rows and columns")
{
    const Mesh m = uniform_mesh(2, 2, 1, 2, 1);
    const auto mat = model();
    const Assembler as(m, mat, no_bcs());
    const auto s = random_state(m, mat, 6);
    const auto sys = as.assemble(s.u, s.phi, s.states);
    const std::vector<int> fixed = {0, 3, m.num_u_dofs() + 1};
    const auto c = condense(sys, fixed);
    CHECK(c.free_dofs.size() == static_cast<std::size_t>(m.num_dofs() - 3));
    CHECK(c.num_free_u == m.num_u_dofs() - 2);
    const Eigen::MatrixXd full = dense(sys.K), red = dense(c.K);
    for (std::size_t i = 0; i < c.free_dofs.size(); ++i) {
        CHECK(c.r[i] == sys.r[c.free_dofs[i]]);
        for (std::size_t j = 0; j < c.free_dofs.size(); ++j) CHECK(red(i, j) == full(c.free_dofs[i], c.free_dofs[j]));
    }
}

TEST_CASE("uniform body force loads sum to the total force")
{
    const Mesh m = uniform_mesh(3, 2, 2, 2, 3);
    BoundaryConditions bc;
    bc.body_force = Eigen::Vector2d(0.0, -2.0);
    bc.tractions.push_back({Edge::Top, Eigen::Vector2d(1.5, 0.0)});
    const Assembler as(m, model(), bc);
    double fx = 0, fy = 0;
    for (int n = 0; n < m.num_nodes(); ++n) {
        fx += as.external_force()[m.dof(n, Field::Ux)];
        fy += as.external_force()[m.dof(n, Field::Uy)];
    }
    CHECK(fy == doctest::Approx(-2.0 * 6.0));
    CHECK(fx == doctest::Approx(1.5 * 2.0));
}
