#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pf4/assembly.hpp"
#include "pf4/discretization.hpp"
#include "pf4/material.hpp"

namespace pf4 {

/// Fatal linear-algebra failure (singular or non-finite system).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Direct sparse LU for the condensed nonsymmetric system. The symbolic
/// analysis is reused while the sparsity pattern is unchanged.
class LinearSolver {
public:
    LinearSolver();
    ~LinearSolver();
    LinearSolver(LinearSolver&&) noexcept;
    LinearSolver& operator=(LinearSolver&&) noexcept;

    Eigen::VectorXd solve(const SparseMatrix& K, const Eigen::VectorXd& rhs);
    /// Name of the factorization backend.
    static std::string_view backend();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
Eigen::VectorXd linear_solve(const SparseMatrix& K, const Eigen::VectorXd& rhs);

struct SolverSettings {
    double tol = 1e-4;
    int max_iter = 50;
    HistoryMode history = HistoryMode::PerStep;
    int max_halvings = 4;
    bool operator==(const SolverSettings&) const = default;
};

struct SimState {
    Eigen::VectorXd u;
    Eigen::VectorXd phi;
    std::vector<QuadPointState> states;
    int step_index = 0;
    double applied = 0.0;
};

/// Undeformed, undamaged state with the history at its floor.
SimState initial_state(const Mesh& mesh, const MaterialModel& mat);

struct NewtonResult {
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;  // max(|r_u|_inf, |r_phi|_inf) per evaluation
};

/// Residual norm used by the convergence test on free dofs.
double residual_norm(const CondensedSystem& c);

/// Writes prescribed Dirichlet values (driven dofs at drive_sign * applied).
void apply_dirichlet(SimState& state, const BoundaryConditions& bcs, double applied);

/// Monolithic Newton iteration on the coupled system at fixed prescribed
/// displacement. Leaves `state` at the last iterate.
NewtonResult newton_step(SimState& state, const Assembler& assembler, const BoundaryConditions& bcs, double applied,
                         const SolverSettings& settings, LinearSolver& solver);

/// Raises H at every quadrature point to the current driving force.
void update_history_field(SimState& state, const Assembler& assembler);

enum class StepStatus { Converged, Halved, Failed };
std::string_view to_string(StepStatus s);

struct CurveRow {
    int step = 0;
    double applied = 0.0;   // mm
    double reaction = 0.0;  // N
    double cmod = 0.0;      // mm, NaN without a gauge
    int iterations = 0;
    StepStatus status = StepStatus::Converged;
};

using LoadCurve = std::vector<CurveRow>;

/// Two boundary points whose horizontal displacement difference is the CMOD.
struct CmodGauge {
    Eigen::Vector2d left;
    Eigen::Vector2d right;
};

struct Schedule {
    double du = 0.01;
    int max_steps = 100;
    std::optional<double> cmod_target;
};

struct Problem {
    const Mesh* mesh = nullptr;
    MaterialModel material;
    BoundaryConditions bcs;
    Schedule schedule;
    SolverSettings settings;
    double thickness = 1.0;
    std::optional<CmodGauge> gauge;
    int threads = 0;
};

struct Observer {
    std::function<void(const CurveRow&)> on_row;
    /// Called with the initial state and every `snapshot_interval` accepted steps.
    std::function<void(const SimState&)> on_snapshot;
    int snapshot_interval = 0;
};

struct SimulationResult {
    LoadCurve curve;
    SimState final_state;
    bool failed = false;
    int phase_range_warnings = 0;  // steps with phi outside [-0.01, 1.01]
};

/// Displacement-controlled step loop with step halving.
SimulationResult run_simulation(const Problem& problem, const Observer& observer = {});

/// Reaction (N) at the driven dofs of an assembled system.
double driven_reaction(const AssembledSystem& sys, const BoundaryConditions& bcs, double thickness);

}  // namespace pf4
