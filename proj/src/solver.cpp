#include "pf4/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>
#ifdef PF4_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

namespace pf4 {

struct LinearSolver::Impl {
#ifdef PF4_HAVE_UMFPACK
    Eigen::UmfPackLU<SparseMatrix> lu;
#else
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
#endif
    std::vector<int> outer;
    std::vector<int> inner;
    bool analyzed = false;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

std::string_view LinearSolver::backend()
{
#ifdef PF4_HAVE_UMFPACK
    return "umfpack";
#else
    return "eigen-sparselu";
#endif
}

Eigen::VectorXd LinearSolver::solve(const SparseMatrix& K, const Eigen::VectorXd& rhs)
{
    if (K.rows() != K.cols() || K.rows() != rhs.size()) throw SolverError("linear system dimension mismatch");
    if (!K.isCompressed()) throw SolverError("linear system must be in compressed storage");
    if (!rhs.allFinite()) throw SolverError("non-finite right-hand side");
    const int n = static_cast<int>(K.rows());
    if (n == 0) return Eigen::VectorXd();

    const bool same = impl_->analyzed && static_cast<int>(impl_->outer.size()) == n + 1 &&
                      std::equal(impl_->outer.begin(), impl_->outer.end(), K.outerIndexPtr()) &&
                      static_cast<Eigen::Index>(impl_->inner.size()) == K.nonZeros() &&
                      std::equal(impl_->inner.begin(), impl_->inner.end(), K.innerIndexPtr());
    if (!same) {
        impl_->lu.analyzePattern(K);
        impl_->outer.assign(K.outerIndexPtr(), K.outerIndexPtr() + n + 1);
        impl_->inner.assign(K.innerIndexPtr(), K.innerIndexPtr() + K.nonZeros());
        impl_->analyzed = true;
    }
    impl_->lu.factorize(K);
    if (impl_->lu.info() != Eigen::Success) {
        std::ostringstream os;
        os << "sparse LU factorization failed on a " << n << "x" << n << " system with " << K.nonZeros()
           << " nonzeros (" << backend() << ")";
#ifndef PF4_HAVE_UMFPACK
        os << ": " << impl_->lu.lastErrorMessage();
#endif
        impl_->analyzed = false;
        throw SolverError(os.str());
    }
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    if (!x.allFinite()) throw SolverError("numerically singular system: solution is not finite");
    return x;
}

Eigen::VectorXd linear_solve(const SparseMatrix& K, const Eigen::VectorXd& rhs)
{
    LinearSolver s;
    return s.solve(K, rhs);
}

SimState initial_state(const Mesh& mesh, const MaterialModel& mat)
{
    SimState s;
    s.u = Eigen::VectorXd::Zero(mesh.num_u_dofs());
    s.phi = Eigen::VectorXd::Zero(mesh.num_nodes());
    s.states.assign(mesh.num_qps(), fresh_state(mat));
    return s;
}

double residual_norm(const CondensedSystem& c)
{
    const auto nu = c.num_free_u;
    const auto np = c.r.size() - nu;
    const double ru = nu > 0 ? c.r.head(nu).lpNorm<Eigen::Infinity>() : 0.0;
    const double rp = np > 0 ? c.r.tail(np).lpNorm<Eigen::Infinity>() : 0.0;
    if (!std::isfinite(ru) || !std::isfinite(rp)) return std::numeric_limits<double>::infinity();
    return std::max(ru, rp);
}

void apply_dirichlet(SimState& state, const BoundaryConditions& bcs, double applied)
{
    for (const auto& d : bcs.dirichlet) {
        state.u[d.dof] = d.driven ? bcs.drive_sign * applied : d.value;
    }
}

namespace {

std::vector<int> constrained_dofs(const BoundaryConditions& bcs)
{
    std::vector<int> c;
    for (const auto& d : bcs.dirichlet) c.push_back(d.dof);
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace

NewtonResult newton_step(SimState& state, const Assembler& assembler, const BoundaryConditions& bcs, double applied,
                         const SolverSettings& settings, LinearSolver& solver)
{
    apply_dirichlet(state, bcs, applied);
    const auto constrained = constrained_dofs(bcs);
    const int nu = static_cast<int>(state.u.size());

    NewtonResult result;
    for (int it = 0;; ++it) {
        const auto sys = assembler.assemble(state.u, state.phi, state.states, true);
        auto c = condense(sys, constrained, true);
        const double norm = residual_norm(c);
        result.residual_history.push_back(norm);
        if (norm <= settings.tol) {
            result.converged = true;
            result.iterations = it;
            return result;
        }
        if (it >= settings.max_iter || !std::isfinite(norm)) {
            result.iterations = it;
            return result;
        }
        const Eigen::VectorXd delta = solver.solve(c.K, -c.r);
        for (std::size_t k = 0; k < c.free_dofs.size(); ++k) {
            const int d = c.free_dofs[k];
            if (d < nu) {
                state.u[d] += delta[static_cast<Eigen::Index>(k)];
            } else {
                state.phi[d - nu] += delta[static_cast<Eigen::Index>(k)];
            }
        }
    }
}

void update_history_field(SimState& state, const Assembler& assembler)
{
    const auto eps = assembler.strains(state.u);
    const auto& mat = assembler.material();
    for (std::size_t q = 0; q < eps.size(); ++q) {
        state.states[q] = update_history(state.states[q], driving_force(eps[q], mat), mat);
        state.states[q].eps = eps[q];
    }
}

std::string_view to_string(StepStatus s)
{
    switch (s) {
    case StepStatus::Converged: return "converged";
    case StepStatus::Halved: return "halved";
    case StepStatus::Failed: return "failed";
    }
    return "?";
}

double driven_reaction(const AssembledSystem& sys, const BoundaryConditions& bcs, double thickness)
{
    double sum = 0.0;
    for (const auto& d : bcs.dirichlet) {
        if (d.driven) sum += sys.r[d.dof];
    }
    return bcs.drive_sign * thickness * sum;
}

namespace {

struct GaugeWeights {
    std::vector<int> nodes;
    std::vector<double> values;
};

GaugeWeights gauge_weights(const Mesh& mesh, const Eigen::Vector2d& p)
{
    const auto loc = locate_point_dof(mesh, p);
    GaugeWeights g;
    for (std::size_t k = 0; k < loc.cps.size(); ++k) {
        const int node = mesh.node_of_cp(loc.cps[k]);
        if (node < 0) continue;
        g.nodes.push_back(node);
        g.values.push_back(loc.values[k]);
    }
    return g;
}

double gauge_ux(const GaugeWeights& g, const Eigen::VectorXd& u)
{
    double v = 0.0;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) v += g.values[k] * u[2 * g.nodes[k]];
    return v;
}

}  // namespace

SimulationResult run_simulation(const Problem& problem, const Observer& observer)
{
    if (!problem.mesh) throw std::invalid_argument("problem has no mesh");
    const Mesh& mesh = *problem.mesh;
    problem.bcs.validate(mesh);
    const auto& sched = problem.schedule;
    if (!(sched.du > 0.0)) throw std::invalid_argument("displacement increment must be positive");
    if (sched.max_steps < 0) throw std::invalid_argument("step count must be nonnegative");

    const Assembler assembler(mesh, problem.material, problem.bcs, problem.settings.history, problem.threads);
    LinearSolver solver;

    std::optional<std::pair<GaugeWeights, GaugeWeights>> gauge;
    if (problem.gauge) gauge.emplace(gauge_weights(mesh, problem.gauge->left), gauge_weights(mesh, problem.gauge->right));
    auto cmod = [&](const Eigen::VectorXd& u) {
        if (!gauge) return std::numeric_limits<double>::quiet_NaN();
        return gauge_ux(gauge->second, u) - gauge_ux(gauge->first, u);
    };

    SimulationResult out;
    SimState state = initial_state(mesh, problem.material);
    if (observer.on_snapshot) observer.on_snapshot(state);

    int row_index = 0;
    int accepted = 0;
    auto emit = [&](const CurveRow& row) {
        out.curve.push_back(row);
        if (observer.on_row) observer.on_row(row);
    };

    for (int step = 1; step <= sched.max_steps; ++step) {
        const double target = step * sched.du;
        double inc = sched.du;
        int halvings = 0;
        bool stop = false;
        while (state.applied < target - 1e-12 * sched.du) {
            const double next = std::min(target, state.applied + inc);
            SimState trial = state;
            const auto nr = newton_step(trial, assembler, problem.bcs, next, problem.settings, solver);
            if (!nr.converged) {
                if (halvings >= problem.settings.max_halvings) {
                    CurveRow row;
                    row.step = ++row_index;
                    row.applied = next;
                    row.reaction = std::numeric_limits<double>::quiet_NaN();
                    row.cmod = std::numeric_limits<double>::quiet_NaN();
                    row.iterations = nr.iterations;
                    row.status = StepStatus::Failed;
                    emit(row);
                    out.failed = true;
                    stop = true;
                    break;
                }
                inc *= 0.5;
                ++halvings;
                continue;
            }

            update_history_field(trial, assembler);
            trial.applied = next;
            trial.step_index = ++row_index;
            const auto sys = assembler.assemble(trial.u, trial.phi, trial.states, false);
            CurveRow row;
            row.step = row_index;
            row.applied = next;
            row.reaction = driven_reaction(sys, problem.bcs, problem.thickness);
            row.cmod = cmod(trial.u);
            row.iterations = nr.iterations;
            row.status = halvings > 0 ? StepStatus::Halved : StepStatus::Converged;
            state = std::move(trial);
            emit(row);

            // Field values at quadrature points; control coefficients near
            // removed regions are only weakly tied to the field.
            const Eigen::VectorXd pq = assembler.phase_at_qps(state.phi);
            const double pmin = pq.size() ? pq.minCoeff() : 0.0;
            const double pmax = pq.size() ? pq.maxCoeff() : 0.0;
            if (pmin < -0.01 || pmax > 1.01) {
                ++out.phase_range_warnings;
                std::cerr << "warning: phase field left [-0.01, 1.01] at step " << row.step << " (min " << pmin
                          << ", max " << pmax << ")\n";
            }
            ++accepted;
            if (observer.on_snapshot && observer.snapshot_interval > 0 && accepted % observer.snapshot_interval == 0) {
                observer.on_snapshot(state);
            }
            if (sched.cmod_target && std::isfinite(row.cmod) && row.cmod >= *sched.cmod_target) {
                stop = true;
                break;
            }
        }
        if (stop) break;
    }
    out.final_state = std::move(state);
    return out;
}

}  // namespace pf4
