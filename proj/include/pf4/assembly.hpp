#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pf4/discretization.hpp"
#include "pf4/material.hpp"

namespace pf4 {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// How the history field enters the residual during Newton iterations.
enum class HistoryMode {
    PerStep,       // H frozen within a load step, updated after convergence
    PerIteration,  // H = max(H_n, H_trial(eps)) at every residual evaluation
};

/// Operators of one quadrature point in matrix form.
struct ElementKernels {
    Eigen::MatrixXd Bu;    // 3 x 2n, rows (eps_xx, eps_yy, gamma_xy)
    Eigen::MatrixXd Bphi;  // 2 x n
    Eigen::RowVectorXd Dphi;  // 1 x n Laplacian
    Eigen::RowVectorXd N;
    double weight = 0.0;
};

ElementKernels element_kernels(const QuadPoint& qp);

struct ElementResiduals {
    Eigen::VectorXd ru;    // 2n
    Eigen::VectorXd rphi;  // n
};

struct ElementTangents {
    Eigen::MatrixXd uu;
    Eigen::MatrixXd uphi;
    Eigen::MatrixXd phiu;
    Eigen::MatrixXd phiphi;
};

/// Internal residual contributions of one element (no external loads).
/// `states` points at the element's first quadrature-point state.
ElementResiduals element_residuals(const Element& el, const Eigen::VectorXd& u_e, const Eigen::VectorXd& phi_e,
                                   const QuadPointState* states, const MaterialModel& mat,
                                   HistoryMode mode = HistoryMode::PerStep);

ElementTangents element_tangents(const Element& el, const Eigen::VectorXd& u_e, const Eigen::VectorXd& phi_e,
                                 const QuadPointState* states, const MaterialModel& mat,
                                 HistoryMode mode = HistoryMode::PerStep);

/// Coupled residual and tangent over all dofs of the mesh, before any
/// Dirichlet condensation. Row/column order follows the mesh dof layout
/// (u dofs first, then phi).
struct AssembledSystem {
    int num_u = 0;
    int num_phi = 0;
    SparseMatrix K;
    Eigen::VectorXd r;

    Eigen::VectorXd r_u() const { return r.head(num_u); }
    Eigen::VectorXd r_phi() const { return r.tail(num_phi); }
    SparseMatrix K_uu() const { return K.block(0, 0, num_u, num_u); }
    SparseMatrix K_uphi() const { return K.block(0, num_u, num_u, num_phi); }
    SparseMatrix K_phiu() const { return K.block(num_u, 0, num_phi, num_u); }
    SparseMatrix K_phiphi() const { return K.block(num_u, num_u, num_phi, num_phi); }
};

/// System restricted to free dofs.
struct CondensedSystem {
    SparseMatrix K;
    Eigen::VectorXd r;
    std::vector<int> free_dofs;
    int num_free_u = 0;  // free u dofs precede free phi dofs
};

/// Removes constrained rows and columns. Constrained dofs already hold their
/// prescribed values in the state, so their coupling to the free dofs is
/// carried by r.
CondensedSystem condense(const AssembledSystem& sys, const std::vector<int>& constrained, bool with_matrix = true);

/// Parallel element evaluation with a deterministic, element-ordered scatter
/// into a sparsity pattern fixed at construction.
class Assembler {
public:
    Assembler(const Mesh& mesh, const MaterialModel& mat, const BoundaryConditions& bcs,
              HistoryMode mode = HistoryMode::PerStep, int threads = 0);

    AssembledSystem assemble(const Eigen::VectorXd& u, const Eigen::VectorXd& phi,
                             const std::vector<QuadPointState>& states, bool with_matrix = true) const;

    /// Equivalent nodal body-force and traction loads (per unit thickness).
    const Eigen::VectorXd& external_force() const { return f_ext_; }

    /// Elastic energy int g psi+ + psi- minus the external work.
    double displacement_energy(const Eigen::VectorXd& u, const Eigen::VectorXd& phi) const;
    /// int Gc psi_phi + g(phi) H plus the bound penalty, H taken from `states`.
    double phase_energy(const Eigen::VectorXd& phi, const std::vector<QuadPointState>& states) const;

    /// Strain at every quadrature point.
    std::vector<Eigen::Matrix2d> strains(const Eigen::VectorXd& u) const;
    /// Phase field at every quadrature point.
    Eigen::VectorXd phase_at_qps(const Eigen::VectorXd& phi) const;

    const Mesh& mesh() const { return mesh_; }
    const MaterialModel& material() const { return mat_; }
    HistoryMode history_mode() const { return mode_; }
    int threads() const { return threads_; }

private:
    void build_pattern();
    void build_external_force();
    void gather(const Element& el, const Eigen::VectorXd& u, const Eigen::VectorXd& phi, Eigen::VectorXd& ue,
                Eigen::VectorXd& pe) const;

    const Mesh& mesh_;
    MaterialModel mat_;
    BoundaryConditions bcs_;
    HistoryMode mode_;
    int threads_;
    SparseMatrix pattern_;
    Eigen::VectorXd f_ext_;
};

/// Thread count from PF4_THREADS, defaulting to the hardware concurrency.
int default_thread_count();

}  // namespace pf4
