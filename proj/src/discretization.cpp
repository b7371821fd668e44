#include "pf4/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace pf4 {

GaussRule gauss_rule(int n)
{
    if (n < 1 || n > 6) throw std::invalid_argument("Gauss rule supports 1..6 points, got " + std::to_string(n));
    GaussRule r;
    r.points.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.points[n - 1 - i] = x;
        r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    if (n % 2 == 1) r.points[n / 2] = 0.0;
    return r;
}

Mesh::Mesh(SplinePatch patch, int quad_points_per_dir) : patch_(std::move(patch)), nq_(quad_points_per_dir)
{
    const auto rule = gauss_rule(nq_);
    const auto& kx = patch_.kv_xi();
    const auto& ky = patch_.kv_eta();
    for (int sy : ky.nonempty_spans()) {
        for (int sx : kx.nonempty_spans()) {
            Element el;
            el.span_xi = sx;
            el.span_eta = sy;
            el.xi0 = kx.knots()[sx];
            el.xi1 = kx.knots()[sx + 1];
            el.eta0 = ky.knots()[sy];
            el.eta1 = ky.knots()[sy + 1];
            const double jx = 0.5 * (el.xi1 - el.xi0), jy = 0.5 * (el.eta1 - el.eta0);
            for (int b = 0; b < nq_; ++b) {
                for (int a = 0; a < nq_; ++a) {
                    const double xi = 0.5 * (el.xi0 + el.xi1) + jx * rule.points[a];
                    const double eta = 0.5 * (el.eta0 + el.eta1) + jy * rule.points[b];
                    const auto g = geometry_map(patch_, xi, eta);
                    if (el.cps.empty()) el.cps = g.active;
                    QuadPoint q;
                    q.x = g.x;
                    q.y = g.y;
                    q.weight = rule.weights[a] * rule.weights[b] * jx * jy * g.det_j;
                    q.N = g.N;
                    q.dNdx = g.dNdx;
                    q.dNdy = g.dNdy;
                    q.lap = g.d2Ndxx + g.d2Ndyy;
                    el.qps.push_back(std::move(q));
                }
            }
            elements_.push_back(std::move(el));
        }
    }
    renumber();
}

void Mesh::renumber()
{
    const int ncp = patch_.num_control_points();
    std::vector<char> used(ncp, 0);
    for (const auto& el : elements_) {
        for (int cp : el.cps) used[cp] = 1;
    }
    cp_to_node_.assign(ncp, -1);
    node_to_cp_.clear();
    for (int cp = 0; cp < ncp; ++cp) {
        if (used[cp]) {
            cp_to_node_[cp] = static_cast<int>(node_to_cp_.size());
            node_to_cp_.push_back(cp);
        }
    }
    qp_offsets_.resize(elements_.size());
    num_qps_ = 0;
    for (std::size_t e = 0; e < elements_.size(); ++e) {
        qp_offsets_[e] = num_qps_;
        num_qps_ += static_cast<int>(elements_[e].qps.size());
    }
}

std::vector<int> Mesh::element_u_dofs(const Element& el) const
{
    std::vector<int> d;
    d.reserve(2 * el.cps.size());
    for (int cp : el.cps) {
        const int node = cp_to_node_[cp];
        d.push_back(2 * node);
        d.push_back(2 * node + 1);
    }
    return d;
}

std::vector<int> Mesh::element_phi_dofs(const Element& el) const
{
    std::vector<int> d;
    d.reserve(el.cps.size());
    for (int cp : el.cps) d.push_back(2 * num_nodes() + cp_to_node_[cp]);
    return d;
}

void Mesh::remove_region(const RemovedRegion& region)
{
    std::erase_if(elements_, [&](const Element& el) {
        const auto c = patch_.point(0.5 * (el.xi0 + el.xi1), 0.5 * (el.eta0 + el.eta1));
        return c.x() > region.x0 && c.x() < region.x1 && c.y() > region.y0 && c.y() < region.y1;
    });
    removed_.push_back(region);
    renumber();
}

bool Mesh::in_removed_region(double x, double y) const
{
    for (const auto& r : removed_) {
        if (x > r.x0 && x < r.x1 && y > r.y0 && y < r.y1) return true;
    }
    return false;
}

std::vector<double> graded_breaks(double a, double b, double coarse_h, const std::vector<RefinementBand>& bands,
                                  Axis axis, const std::vector<double>& lines)
{
    if (!(b > a)) throw MeshError("empty interval for knot grading");
    if (!(coarse_h > 0)) throw MeshError("coarse span width must be positive");
    const double tol = 1e-9 * (b - a);
    for (const auto& band : bands) {
        if (band.axis != axis) continue;
        if (!(band.h > 0)) throw MeshError("refinement band h must be positive");
        if (band.lo < a - tol || band.hi > b + tol || !(band.hi > band.lo)) {
            std::ostringstream os;
            os << "refinement band [" << band.lo << ", " << band.hi << "] lies outside the domain [" << a << ", "
               << b << "]";
            throw MeshError(os.str());
        }
    }

    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / coarse_h - 1e-9)));
    std::vector<double> br;
    for (int i = 0; i <= n; ++i) br.push_back(a + (b - a) * i / n);
    br.back() = b;
    for (double l : lines) {
        if (l > a + tol && l < b - tol) br.push_back(l);
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end(), [tol](double u, double v) { return std::abs(u - v) <= tol; }),
             br.end());

    auto target = [&](double lo, double hi) {
        double t = coarse_h;
        for (const auto& band : bands) {
            if (band.axis != axis) continue;
            const double overlap = std::min(hi, band.hi) - std::max(lo, band.lo);
            if (overlap > tol) t = std::min(t, band.h);
        }
        return t;
    };

    for (bool changed = true; changed;) {
        changed = false;
        std::vector<double> next{br.front()};
        for (std::size_t k = 0; k + 1 < br.size(); ++k) {
            const double lo = br[k], hi = br[k + 1], w = hi - lo;
            bool split = w > target(lo, hi) + tol;
            if (!split && k > 0) split = w > 2.0 * (br[k] - br[k - 1]) + tol;
            if (!split && k + 2 < br.size()) split = w > 2.0 * (br[k + 2] - br[k + 1]) + tol;
            if (split) {
                next.push_back(0.5 * (lo + hi));
                changed = true;
            }
            next.push_back(hi);
        }
        br = std::move(next);
    }
    return br;
}

Mesh build_mesh(const MeshSpec& spec)
{
    if (spec.degree < 2) throw MeshError("degree must be at least 2 for the C1 basis");
    if (!(spec.lx > 0 && spec.ly > 0)) throw MeshError("patch dimensions must be positive");
    const double xa = spec.x0, xb = spec.x0 + spec.lx;
    const double ya = spec.y0, yb = spec.y0 + spec.ly;

    const auto bx = graded_breaks(xa, xb, spec.coarse_hx, spec.bands, Axis::X, spec.lines_x);
    const auto by = graded_breaks(ya, yb, spec.coarse_hy, spec.bands, Axis::Y, spec.lines_y);

    const int nx = std::max(1, static_cast<int>(std::ceil(spec.lx / spec.coarse_hx - 1e-9)));
    const int ny = std::max(1, static_cast<int>(std::ceil(spec.ly / spec.coarse_hy - 1e-9)));
    const auto kx0 = KnotVector::uniform(spec.degree, nx, xa, xb);
    const auto ky0 = KnotVector::uniform(spec.degree, ny, ya, yb);
    auto patch = SplinePatch::rectangle(kx0, ky0, xa, ya, spec.lx, spec.ly);

    auto refine = [&](Direction d, const std::vector<double>& target) {
        const auto existing = patch.knots(d).breaks();
        const double tol = 1e-9 * (target.back() - target.front());
        for (double t : target) {
            const bool present = std::any_of(existing.begin(), existing.end(),
                                             [&](double e) { return std::abs(e - t) <= tol; });
            if (!present) patch = insert_knot(patch, d, t);
        }
    };
    refine(Direction::Xi, bx);
    refine(Direction::Eta, by);
    return Mesh(std::move(patch), spec.degree + 1);
}

void apply_notch(Mesh& mesh, const NotchSpec& notch)
{
    const auto& kx = mesh.patch().kv_xi();
    const auto& ky = mesh.patch().kv_eta();
    const double xa = kx.front(), xb = kx.back(), ya = ky.front(), yb = ky.back();
    const double tol = 1e-9 * std::max(xb - xa, yb - ya);
    if (notch.x1 - notch.x0 <= tol || notch.y1 - notch.y0 <= tol) return;
    if (notch.x0 < xa - tol || notch.x1 > xb + tol || notch.y0 < ya - tol || notch.y1 > yb + tol) {
        throw MeshError("notch extends outside the patch");
    }
    const bool reaches = std::abs(notch.x0 - xa) <= tol || std::abs(notch.x1 - xb) <= tol ||
                         std::abs(notch.y0 - ya) <= tol || std::abs(notch.y1 - yb) <= tol;
    if (!reaches) throw MeshError("notch must reach the patch boundary");

    auto on_line = [tol](const std::vector<double>& breaks, double v) {
        return std::any_of(breaks.begin(), breaks.end(), [&](double b) { return std::abs(b - v) <= tol; });
    };
    const auto bxs = kx.breaks(), bys = ky.breaks();
    const std::pair<double, const std::vector<double>*> faces[] = {
        {notch.x0, &bxs}, {notch.x1, &bxs}, {notch.y0, &bys}, {notch.y1, &bys}};
    for (const auto& [v, br] : faces) {
        if (!on_line(*br, v)) {
            std::ostringstream os;
            os << "notch face at " << v << " does not coincide with a knot line; refine the mesh first";
            throw MeshError(os.str());
        }
    }
    mesh.remove_region({notch.x0, notch.x1, notch.y0, notch.y1});
}

namespace {

struct IsoLine {
    bool fixed_xi;  // true: xi fixed, eta varies
    double fixed;
    double lo, hi;
};

}  // namespace

PointLocation locate_point_dof(const Mesh& mesh, const Eigen::Vector2d& point)
{
    const auto& patch = mesh.patch();
    const auto& kx = patch.kv_xi();
    const auto& ky = patch.kv_eta();
    std::vector<IsoLine> lines = {{true, kx.front(), ky.front(), ky.back()},
                                  {true, kx.back(), ky.front(), ky.back()},
                                  {false, ky.front(), kx.front(), kx.back()},
                                  {false, ky.back(), kx.front(), kx.back()}};
    for (const auto& r : mesh.removed_regions()) {
        lines.push_back({true, r.x0, r.y0, r.y1});
        lines.push_back({true, r.x1, r.y0, r.y1});
        lines.push_back({false, r.y0, r.x0, r.x1});
        lines.push_back({false, r.y1, r.x0, r.x1});
    }

    auto eval = [&](const IsoLine& l, double t) {
        const double xi = l.fixed_xi ? l.fixed : t;
        const double eta = l.fixed_xi ? t : l.fixed;
        const auto g = geometry_map(patch, xi, eta);
        const Eigen::Vector2d c(g.x, g.y);
        const Eigen::Vector2d d = l.fixed_xi ? Eigen::Vector2d(g.jacobian.col(1)) : Eigen::Vector2d(g.jacobian.col(0));
        return std::pair{c, d};
    };

    for (const auto& l : lines) {
        // Start from the closest of a few samples, then Gauss-Newton on
        // (C(t) - P) . C'(t) = 0.
        double t = l.lo, best = 1e300;
        for (int k = 0; k <= 16; ++k) {
            const double s = l.lo + (l.hi - l.lo) * k / 16.0;
            const double dist = (eval(l, s).first - point).norm();
            if (dist < best) {
                best = dist;
                t = s;
            }
        }
        for (int it = 0; it < 50; ++it) {
            const auto [c, d] = eval(l, t);
            const double step = (c - point).dot(d) / d.squaredNorm();
            t = std::clamp(t - step, l.lo, l.hi);
            if (std::abs(step) < 1e-14 * (l.hi - l.lo)) break;
        }
        const auto [c, d] = eval(l, t);
        if ((c - point).norm() > 1e-8) continue;

        PointLocation loc;
        loc.xi = l.fixed_xi ? l.fixed : t;
        loc.eta = l.fixed_xi ? t : l.fixed;
        const auto bx = basis_and_derivs(kx, loc.xi, 0);
        const auto by = basis_and_derivs(ky, loc.eta, 0);
        for (int j = 0; j <= ky.degree(); ++j) {
            for (int i = 0; i <= kx.degree(); ++i) {
                const double v = bx.values[i] * by.values[j];
                if (std::abs(v) > 1e-14) {
                    loc.cps.push_back(patch.index(bx.span - kx.degree() + i, by.span - ky.degree() + j));
                    loc.values.push_back(v);
                }
            }
        }
        double dmin = 1e300;
        for (int node = 0; node < mesh.num_nodes(); ++node) {
            const int cp = mesh.cp_of_node(node);
            const double dist = (patch.control_points()[cp] - point).norm();
            if (dist < dmin) {
                dmin = dist;
                loc.nearest_cp = cp;
            }
        }
        return loc;
    }
    std::ostringstream os;
    os << "point (" << point.x() << ", " << point.y() << ") is not on the mesh boundary within 1e-8 mm";
    throw MeshError(os.str());
}

std::string_view to_string(Edge e)
{
    switch (e) {
    case Edge::Left: return "left";
    case Edge::Right: return "right";
    case Edge::Bottom: return "bottom";
    case Edge::Top: return "top";
    }
    return "?";
}

Edge edge_from_string(std::string_view s)
{
    for (auto e : {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top}) {
        if (to_string(e) == s) return e;
    }
    throw std::invalid_argument("unknown edge '" + std::string(s) + "'");
}

std::vector<int> edge_control_points(const Mesh& mesh, Edge edge, double lo, double hi)
{
    const auto& patch = mesh.patch();
    const int nx = patch.num_xi(), ny = patch.num_eta();
    std::vector<int> cps;
    const bool horizontal = edge == Edge::Bottom || edge == Edge::Top;
    const int count = horizontal ? nx : ny;
    const double tol = 1e-9 * (std::abs(lo) + std::abs(hi) + 1.0);
    for (int k = 0; k < count; ++k) {
        int cp = 0;
        switch (edge) {
        case Edge::Bottom: cp = patch.index(k, 0); break;
        case Edge::Top: cp = patch.index(k, ny - 1); break;
        case Edge::Left: cp = patch.index(0, k); break;
        case Edge::Right: cp = patch.index(nx - 1, k); break;
        }
        if (mesh.node_of_cp(cp) < 0) continue;
        const auto& P = patch.control_points()[cp];
        const double s = horizontal ? P.x() : P.y();
        if (s >= lo - tol && s <= hi + tol) cps.push_back(cp);
    }
    return cps;
}

std::vector<int> BoundaryConditions::driven_dofs() const
{
    std::vector<int> d;
    for (const auto& c : dirichlet) {
        if (c.driven) d.push_back(c.dof);
    }
    return d;
}

std::vector<int> BoundaryConditions::support_dofs() const
{
    std::vector<int> d;
    for (const auto& c : dirichlet) {
        if (!c.driven) d.push_back(c.dof);
    }
    return d;
}

void BoundaryConditions::validate(const Mesh& mesh) const
{
    if (driven_dofs().empty()) throw std::invalid_argument("displacement control needs at least one driven dof");
    std::set<int> seen;
    for (const auto& c : dirichlet) {
        if (c.dof < 0 || c.dof >= mesh.num_u_dofs()) throw std::invalid_argument("Dirichlet dof out of range");
        if (!seen.insert(c.dof).second) {
            throw std::invalid_argument("dof " + std::to_string(c.dof) + " constrained twice");
        }
    }
    std::set<int> driven;
    for (int d : driven_dofs()) driven.insert(d);
    for (const auto& t : tractions) {
        for (int cp : edge_control_points(mesh, t.edge, -1e300, 1e300)) {
            const int node = mesh.node_of_cp(cp);
            if (driven.count(2 * node) || driven.count(2 * node + 1)) {
                throw std::invalid_argument("a driven dof lies on the traction-loaded edge " +
                                            std::string(to_string(t.edge)));
            }
        }
    }
}

}  // namespace pf4
