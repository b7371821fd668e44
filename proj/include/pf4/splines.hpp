#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pf4 {

/// Raised for parametric values outside the knot range.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a knot insertion or knot vector would lose C1 continuity.
class RefinementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for singular or inverted geometry mappings.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Open knot vector of degree p >= 2 with interior multiplicity <= p-1, so
/// every basis built on it is at least C1.
class KnotVector {
public:
    KnotVector(int degree, std::vector<double> knots);

    /// Open uniform knot vector on [a, b] with `spans` equal spans.
    static KnotVector uniform(int degree, int spans, double a = 0.0, double b = 1.0);
    /// Open knot vector from the distinct breakpoints (all simple interior knots).
    static KnotVector from_breaks(int degree, const std::vector<double>& breaks);

    int degree() const { return degree_; }
    const std::vector<double>& knots() const { return knots_; }
    int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }

    /// Distinct knot values in increasing order.
    std::vector<double> breaks() const;
    /// Span indices s with knots[s] < knots[s+1].
    std::vector<int> nonempty_spans() const;
    int multiplicity(double value) const;
    /// Greville abscissa of basis function i.
    double greville(int i) const;
    std::vector<double> greville() const;

private:
    int degree_;
    std::vector<double> knots_;
};

/// Index s with knots[s] <= xi < knots[s+1]; xi equal to the last knot maps to
/// the last non-empty span.
int find_span(const KnotVector& kv, double xi);

/// Values and parametric derivatives of the p+1 functions active in a span.
struct BasisDerivs {
    int span = 0;
    std::vector<double> values;
    std::vector<double> d1;
    std::vector<double> d2;
};

/// Non-zero basis functions N_{span-p..span} at xi and derivatives up to
/// `order` (0..2). Entries of unrequested orders are left empty.
BasisDerivs basis_and_derivs(const KnotVector& kv, double xi, int order);

enum class Direction { Xi = 0, Eta = 1 };

/// Result of mapping a parametric point through a patch. Active functions are
/// ordered with xi fastest: local index a = i + (p_xi+1) * j.
struct GeometryPoint {
    double x = 0.0;
    double y = 0.0;
    Eigen::Matrix2d jacobian;  // [[x_xi, x_eta], [y_xi, y_eta]]
    double det_j = 0.0;
    int span_xi = 0;
    int span_eta = 0;
    std::vector<int> active;  // global control-point indices
    Eigen::VectorXd N;
    Eigen::VectorXd dNdx;
    Eigen::VectorXd dNdy;
    Eigen::VectorXd d2Ndxx;
    Eigen::VectorXd d2Ndxy;
    Eigen::VectorXd d2Ndyy;
};

/// Tensor-product spline surface. Control point (i, j) is stored at
/// i + num_xi * j.
class SplinePatch {
public:
    SplinePatch(KnotVector kv_xi, KnotVector kv_eta, std::vector<Eigen::Vector2d> control_points,
                std::vector<double> weights = {});

    /// Affine rectangle [x0, x0+lx] x [y0, y0+ly] with control points at the
    /// Greville points, so the map is linear in each parametric direction.
    static SplinePatch rectangle(const KnotVector& kv_xi, const KnotVector& kv_eta, double x0,
                                 double y0, double lx, double ly);

    const KnotVector& knots(Direction d) const { return d == Direction::Xi ? kv_xi_ : kv_eta_; }
    const KnotVector& kv_xi() const { return kv_xi_; }
    const KnotVector& kv_eta() const { return kv_eta_; }
    int num_xi() const { return kv_xi_.num_basis(); }
    int num_eta() const { return kv_eta_.num_basis(); }
    int num_control_points() const { return num_xi() * num_eta(); }
    int index(int i, int j) const { return i + num_xi() * j; }

    const std::vector<Eigen::Vector2d>& control_points() const { return cps_; }
    const std::vector<double>& weights() const { return weights_; }
    bool is_rational() const { return rational_; }

    Eigen::Vector2d point(double xi, double eta) const;

private:
    KnotVector kv_xi_;
    KnotVector kv_eta_;
    std::vector<Eigen::Vector2d> cps_;
    std::vector<double> weights_;
    bool rational_ = false;
};

/// Boehm insertion of a single knot. Throws RefinementError if the new
/// interior multiplicity would exceed p-1.
SplinePatch insert_knot(const SplinePatch& patch, Direction direction, double xi_new);
KnotVector insert_knot(const KnotVector& kv, double xi_new);

/// Physical point, Jacobian and physical first/second derivatives of every
/// active bivariate basis function.
GeometryPoint geometry_map(const SplinePatch& patch, double xi, double eta);

}  // namespace pf4
