#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pf4/splines.hpp"

namespace pf4 {

/// Raised for invalid mesh, refinement or notch requests.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GaussRule {
    std::vector<double> points;
    std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights on [-1, 1] for 1 <= n <= 6.
GaussRule gauss_rule(int n);

enum class Axis { X, Y };

/// Band [lo, hi] along `axis` inside which every knot span is at most h wide.
struct RefinementBand {
    Axis axis = Axis::X;
    double lo = 0.0;
    double hi = 0.0;
    double h = 1.0;
    bool operator==(const RefinementBand&) const = default;
};

/// Axis-aligned rectangle patch with graded single-patch refinement. The
/// parametric coordinates coincide with the physical ones.
struct MeshSpec {
    int degree = 3;
    double x0 = 0.0;
    double y0 = 0.0;
    double lx = 1.0;
    double ly = 1.0;
    double coarse_hx = 1.0;
    double coarse_hy = 1.0;
    std::vector<RefinementBand> bands;
    /// Knot lines that must exist (notch faces, cutout edges).
    std::vector<double> lines_x;
    std::vector<double> lines_y;
};

/// Rectangular region removed from the analysis domain.
struct RemovedRegion {
    double x0, x1, y0, y1;
    bool operator==(const RemovedRegion&) const = default;
};

/// Quadrature point data in physical coordinates.
struct QuadPoint {
    double x = 0.0;
    double y = 0.0;
    double weight = 0.0;  // Gauss weight x |J|
    Eigen::VectorXd N;
    Eigen::VectorXd dNdx;
    Eigen::VectorXd dNdy;
    Eigen::VectorXd lap;  // N_xx + N_yy
};

struct Element {
    int span_xi = 0;
    int span_eta = 0;
    double xi0 = 0.0, xi1 = 0.0, eta0 = 0.0, eta1 = 0.0;
    std::vector<int> cps;  // global control-point indices, xi fastest
    std::vector<QuadPoint> qps;
};

enum class Field { Ux = 0, Uy = 1, Phi = 2 };

/// Analysis mesh: active elements, precomputed quadrature kernels and the dof
/// map. Nodes are the control points that still support an element. Dof
/// layout: u dofs 2*node, 2*node+1 first, then phi at 2*num_nodes + node.
class Mesh {
public:
    Mesh(SplinePatch patch, int quad_points_per_dir);

    const SplinePatch& patch() const { return patch_; }
    int degree_xi() const { return patch_.kv_xi().degree(); }
    int degree_eta() const { return patch_.kv_eta().degree(); }
    int quad_points_per_dir() const { return nq_; }
    const std::vector<Element>& elements() const { return elements_; }
    const std::vector<RemovedRegion>& removed_regions() const { return removed_; }

    int num_nodes() const { return static_cast<int>(node_to_cp_.size()); }
    int num_u_dofs() const { return 2 * num_nodes(); }
    int num_dofs() const { return 3 * num_nodes(); }
    int num_qps() const { return num_qps_; }
    /// Offset of element e's first quadrature point in a flat per-qp array.
    int qp_offset(int e) const { return qp_offsets_[e]; }

    /// -1 if the control point was eliminated.
    int node_of_cp(int cp) const { return cp_to_node_[cp]; }
    int cp_of_node(int node) const { return node_to_cp_[node]; }
    int dof(int node, Field f) const
    {
        return f == Field::Phi ? 2 * num_nodes() + node : 2 * node + static_cast<int>(f);
    }
    /// Global dofs of an element, ordered (ux, uy) interleaved then phi.
    std::vector<int> element_u_dofs(const Element& el) const;
    std::vector<int> element_phi_dofs(const Element& el) const;

    /// Removes elements whose centroid lies in `region` and eliminates
    /// control points left without support.
    void remove_region(const RemovedRegion& region);
    /// True if (x, y) lies in a removed region (open interior).
    bool in_removed_region(double x, double y) const;

private:
    void renumber();

    SplinePatch patch_;
    int nq_;
    std::vector<Element> elements_;
    std::vector<RemovedRegion> removed_;
    std::vector<int> cp_to_node_;
    std::vector<int> node_to_cp_;
    std::vector<int> qp_offsets_;
    int num_qps_ = 0;
};

/// Breakpoints on [a, b] obtained from a uniform coarse grid plus required
/// lines, bisected until every span touching a band is at most the band h and
/// neighbouring spans differ by at most a factor of 2.
std::vector<double> graded_breaks(double a, double b, double coarse_h, const std::vector<RefinementBand>& bands,
                                  Axis axis, const std::vector<double>& lines);

/// Builds the patch by knot insertion from the coarse grid and precomputes
/// quadrature with p+1 points per direction.
Mesh build_mesh(const MeshSpec& spec);

/// Axis-aligned slit or cutout touching the patch boundary.
struct NotchSpec {
    double x0, x1, y0, y1;
};

/// Cuts the notch out of the mesh. Throws MeshError if its interior faces do
/// not coincide with knot lines or it does not reach the boundary.
void apply_notch(Mesh& mesh, const NotchSpec& notch);

struct PointLocation {
    double xi = 0.0;
    double eta = 0.0;
    std::vector<int> cps;  // control points with non-zero basis value
    std::vector<double> values;
    int nearest_cp = -1;  // nearest active control point
};

/// Finds the parametric preimage of a boundary point (patch edge or face of a
/// removed region) by 1D Newton inversion along the boundary curve.
PointLocation locate_point_dof(const Mesh& mesh, const Eigen::Vector2d& point);

enum class Edge { Left, Right, Bottom, Top };
std::string_view to_string(Edge e);
Edge edge_from_string(std::string_view s);

/// Active control points on a patch edge whose Greville position along the
/// edge lies in [lo, hi].
std::vector<int> edge_control_points(const Mesh& mesh, Edge edge, double lo, double hi);

struct DirichletDof {
    int dof = 0;
    double value = 0.0;
    bool driven = false;
};

struct EdgeTraction {
    Edge edge = Edge::Top;
    Eigen::Vector2d t = Eigen::Vector2d::Zero();  // N/mm^2 per unit thickness
};

struct BoundaryConditions {
    std::vector<DirichletDof> dirichlet;
    std::vector<EdgeTraction> tractions;
    Eigen::Vector2d body_force = Eigen::Vector2d::Zero();  // N/mm^3
    /// Sign applied to the driven displacement and to the reported reaction.
    double drive_sign = 1.0;

    std::vector<int> driven_dofs() const;
    std::vector<int> support_dofs() const;
    /// Checks nonempty drive and that no driven dof sits on a traction edge.
    void validate(const Mesh& mesh) const;
};

}  // namespace pf4
