#include "pf4/splines.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pf4 {

KnotVector::KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots))
{
    if (degree_ < 2) {
        throw std::invalid_argument("knot vector degree must be >= 2 for C1 continuity");
    }
    const auto m = static_cast<int>(knots_.size());
    if (m < 2 * (degree_ + 1)) {
        throw std::invalid_argument("knot vector too short for degree " + std::to_string(degree_));
    }
    for (int i = 1; i < m; ++i) {
        if (!(knots_[i] >= knots_[i - 1])) {
            throw std::invalid_argument("knot vector must be nondecreasing");
        }
    }
    if (!(knots_.back() > knots_.front())) {
        throw std::invalid_argument("knot vector has an empty parametric range");
    }
    if (multiplicity(knots_.front()) != degree_ + 1 || multiplicity(knots_.back()) != degree_ + 1) {
        throw std::invalid_argument("knot vector must be open (end multiplicity p+1)");
    }
    for (double b : breaks()) {
        if (b == knots_.front() || b == knots_.back()) continue;
        if (multiplicity(b) > degree_ - 1) {
            std::ostringstream os;
            os << "interior knot " << b << " has multiplicity " << multiplicity(b)
               << " > p-1 = " << degree_ - 1 << " (basis would not be C1)";
            throw RefinementError(os.str());
        }
    }
}

KnotVector KnotVector::uniform(int degree, int spans, double a, double b)
{
    if (spans < 1) throw std::invalid_argument("uniform knot vector needs at least one span");
    std::vector<double> breaks(spans + 1);
    for (int i = 0; i <= spans; ++i) breaks[i] = a + (b - a) * i / spans;
    breaks.back() = b;
    return from_breaks(degree, breaks);
}

KnotVector KnotVector::from_breaks(int degree, const std::vector<double>& breaks)
{
    if (breaks.size() < 2) throw std::invalid_argument("need at least two breakpoints");
    std::vector<double> k;
    k.reserve(breaks.size() + 2 * degree);
    for (int i = 0; i < degree; ++i) k.push_back(breaks.front());
    for (double b : breaks) k.push_back(b);
    for (int i = 0; i < degree; ++i) k.push_back(breaks.back());
    return KnotVector(degree, std::move(k));
}

std::vector<double> KnotVector::breaks() const
{
    std::vector<double> b;
    for (double k : knots_) {
        if (b.empty() || k != b.back()) b.push_back(k);
    }
    return b;
}

std::vector<int> KnotVector::nonempty_spans() const
{
    std::vector<int> spans;
    for (int s = degree_; s < num_basis(); ++s) {
        if (knots_[s] < knots_[s + 1]) spans.push_back(s);
    }
    return spans;
}

int KnotVector::multiplicity(double value) const
{
    return static_cast<int>(std::count(knots_.begin(), knots_.end(), value));
}

double KnotVector::greville(int i) const
{
    double sum = 0.0;
    for (int k = 1; k <= degree_; ++k) sum += knots_[i + k];
    return sum / degree_;
}

std::vector<double> KnotVector::greville() const
{
    std::vector<double> g(num_basis());
    for (int i = 0; i < num_basis(); ++i) g[i] = greville(i);
    return g;
}

int find_span(const KnotVector& kv, double xi)
{
    const auto& U = kv.knots();
    const int p = kv.degree();
    const int n = kv.num_basis();
    if (!(xi >= kv.front() && xi <= kv.back())) {
        std::ostringstream os;
        os << "parameter " << xi << " outside knot range [" << kv.front() << ", " << kv.back() << "]";
        throw DomainError(os.str());
    }
    if (xi >= U[n]) return n - 1;
    // upper_bound gives the first knot > xi; the span starts one before it.
    auto it = std::upper_bound(U.begin() + p, U.begin() + n + 1, xi);
    return static_cast<int>(it - U.begin()) - 1;
}

BasisDerivs basis_and_derivs(const KnotVector& kv, double xi, int order)
{
    const int p = kv.degree();
    if (order < 0 || order > 2 || order > p) {
        throw std::invalid_argument("unsupported derivative order " + std::to_string(order));
    }
    const auto& U = kv.knots();
    const int s = find_span(kv, xi);

    // Piegl & Tiller, algorithm A2.3.
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1), right(p + 1);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = xi - U[s + 1 - j];
        right[j] = U[s + j] - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    std::vector<std::vector<double>> ders(order + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= order; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    int factor = p;
    for (int k = 1; k <= order; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= factor;
        factor *= (p - k);
    }

    BasisDerivs out;
    out.span = s;
    out.values = std::move(ders[0]);
    if (order >= 1) out.d1 = std::move(ders[1]);
    if (order >= 2) out.d2 = std::move(ders[2]);
    return out;
}

SplinePatch::SplinePatch(KnotVector kv_xi, KnotVector kv_eta, std::vector<Eigen::Vector2d> control_points,
                         std::vector<double> weights)
    : kv_xi_(std::move(kv_xi)), kv_eta_(std::move(kv_eta)), cps_(std::move(control_points)),
      weights_(std::move(weights))
{
    const auto n = static_cast<std::size_t>(num_control_points());
    if (cps_.size() != n) {
        throw std::invalid_argument("control grid has " + std::to_string(cps_.size()) + " points, basis needs " +
                                    std::to_string(n));
    }
    if (weights_.empty()) weights_.assign(n, 1.0);
    if (weights_.size() != n) throw std::invalid_argument("weight count does not match control grid");
    for (double w : weights_) {
        if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
        if (w != 1.0) rational_ = true;
    }
}

SplinePatch SplinePatch::rectangle(const KnotVector& kv_xi, const KnotVector& kv_eta, double x0, double y0,
                                   double lx, double ly)
{
    const auto gx = kv_xi.greville();
    const auto gy = kv_eta.greville();
    const double ax = kv_xi.front(), bx = kv_xi.back();
    const double ay = kv_eta.front(), by = kv_eta.back();
    std::vector<Eigen::Vector2d> cps;
    cps.reserve(gx.size() * gy.size());
    for (double ty : gy) {
        for (double tx : gx) {
            cps.emplace_back(x0 + lx * (tx - ax) / (bx - ax), y0 + ly * (ty - ay) / (by - ay));
        }
    }
    return SplinePatch(kv_xi, kv_eta, std::move(cps));
}

Eigen::Vector2d SplinePatch::point(double xi, double eta) const
{
    const auto bx = basis_and_derivs(kv_xi_, xi, 0);
    const auto by = basis_and_derivs(kv_eta_, eta, 0);
    const int p = kv_xi_.degree(), q = kv_eta_.degree();
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    double W = 0.0;
    for (int j = 0; j <= q; ++j) {
        for (int i = 0; i <= p; ++i) {
            const int cp = index(bx.span - p + i, by.span - q + j);
            const double nw = bx.values[i] * by.values[j] * weights_[cp];
            x += nw * cps_[cp];
            W += nw;
        }
    }
    return x / W;
}

KnotVector insert_knot(const KnotVector& kv, double xi_new)
{
    if (!(xi_new > kv.front() && xi_new < kv.back())) {
        throw RefinementError("inserted knot must lie strictly inside the parametric range");
    }
    if (kv.multiplicity(xi_new) + 1 > kv.degree() - 1) {
        std::ostringstream os;
        os << "inserting " << xi_new << " would raise its multiplicity above p-1 and break C1 continuity";
        throw RefinementError(os.str());
    }
    auto k = kv.knots();
    k.insert(std::upper_bound(k.begin(), k.end(), xi_new), xi_new);
    return KnotVector(kv.degree(), std::move(k));
}

namespace {

// Boehm insertion on a homogeneous control polygon.
std::vector<Eigen::Vector3d> insert_into_curve(const KnotVector& kv, double xi_new,
                                               const std::vector<Eigen::Vector3d>& pw)
{
    const int p = kv.degree();
    const auto& U = kv.knots();
    const int k = find_span(kv, xi_new);
    const int n = kv.num_basis();
    std::vector<Eigen::Vector3d> q(n + 1);
    for (int i = 0; i <= k - p; ++i) q[i] = pw[i];
    for (int i = k - p + 1; i <= k; ++i) {
        const double alpha = (xi_new - U[i]) / (U[i + p] - U[i]);
        q[i] = alpha * pw[i] + (1.0 - alpha) * pw[i - 1];
    }
    for (int i = k + 1; i <= n; ++i) q[i] = pw[i - 1];
    return q;
}

}  // namespace

SplinePatch insert_knot(const SplinePatch& patch, Direction direction, double xi_new)
{
    const bool along_xi = direction == Direction::Xi;
    const KnotVector& kv = patch.knots(direction);
    KnotVector refined = insert_knot(kv, xi_new);

    const int nx = patch.num_xi(), ny = patch.num_eta();
    const int nx_new = along_xi ? nx + 1 : nx;
    const int ny_new = along_xi ? ny : ny + 1;
    std::vector<Eigen::Vector2d> cps(static_cast<std::size_t>(nx_new * ny_new));
    std::vector<double> w(cps.size());

    const int lines = along_xi ? ny : nx;
    const int len = along_xi ? nx : ny;
    for (int l = 0; l < lines; ++l) {
        std::vector<Eigen::Vector3d> pw(len);
        for (int t = 0; t < len; ++t) {
            const int cp = along_xi ? patch.index(t, l) : patch.index(l, t);
            const double wt = patch.weights()[cp];
            pw[t] = Eigen::Vector3d(wt * patch.control_points()[cp].x(), wt * patch.control_points()[cp].y(), wt);
        }
        const auto q = insert_into_curve(kv, xi_new, pw);
        for (int t = 0; t <= len; ++t) {
            const int cp = along_xi ? t + nx_new * l : l + nx_new * t;
            w[cp] = q[t].z();
            cps[cp] = Eigen::Vector2d(q[t].x() / q[t].z(), q[t].y() / q[t].z());
        }
    }
    if (along_xi) return SplinePatch(std::move(refined), patch.kv_eta(), std::move(cps), std::move(w));
    return SplinePatch(patch.kv_xi(), std::move(refined), std::move(cps), std::move(w));
}

GeometryPoint geometry_map(const SplinePatch& patch, double xi, double eta)
{
    const int p = patch.kv_xi().degree();
    const int q = patch.kv_eta().degree();
    const auto bx = basis_and_derivs(patch.kv_xi(), xi, 2);
    const auto by = basis_and_derivs(patch.kv_eta(), eta, 2);
    const int nloc = (p + 1) * (q + 1);

    GeometryPoint g;
    g.span_xi = bx.span;
    g.span_eta = by.span;
    g.active.resize(nloc);
    Eigen::VectorXd R(nloc), Rxi(nloc), Reta(nloc), Rxixi(nloc), Rxieta(nloc), Retaeta(nloc);

    for (int j = 0; j <= q; ++j) {
        for (int i = 0; i <= p; ++i) {
            const int a = i + (p + 1) * j;
            g.active[a] = patch.index(bx.span - p + i, by.span - q + j);
            R[a] = bx.values[i] * by.values[j];
            Rxi[a] = bx.d1[i] * by.values[j];
            Reta[a] = bx.values[i] * by.d1[j];
            Rxixi[a] = bx.d2[i] * by.values[j];
            Rxieta[a] = bx.d1[i] * by.d1[j];
            Retaeta[a] = bx.values[i] * by.d2[j];
        }
    }

    if (patch.is_rational()) {
        Eigen::VectorXd w(nloc);
        for (int a = 0; a < nloc; ++a) w[a] = patch.weights()[g.active[a]];
        const double W = w.dot(R), Wxi = w.dot(Rxi), Weta = w.dot(Reta);
        const double Wxixi = w.dot(Rxixi), Wxieta = w.dot(Rxieta), Wetaeta = w.dot(Retaeta);
        Eigen::VectorXd r = w.cwiseProduct(R) / W;
        Eigen::VectorXd rxi = (w.cwiseProduct(Rxi) - r * Wxi) / W;
        Eigen::VectorXd reta = (w.cwiseProduct(Reta) - r * Weta) / W;
        Eigen::VectorXd rxixi = (w.cwiseProduct(Rxixi) - 2.0 * rxi * Wxi - r * Wxixi) / W;
        Eigen::VectorXd retaeta = (w.cwiseProduct(Retaeta) - 2.0 * reta * Weta - r * Wetaeta) / W;
        Eigen::VectorXd rxieta = (w.cwiseProduct(Rxieta) - rxi * Weta - reta * Wxi - r * Wxieta) / W;
        R = r;
        Rxi = rxi;
        Reta = reta;
        Rxixi = rxixi;
        Rxieta = rxieta;
        Retaeta = retaeta;
    }

    Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d Gx = Eigen::Matrix2d::Zero();  // parametric Hessian of x(xi, eta)
    Eigen::Matrix2d Gy = Eigen::Matrix2d::Zero();
    for (int a = 0; a < nloc; ++a) {
        const Eigen::Vector2d& P = patch.control_points()[g.active[a]];
        g.x += R[a] * P.x();
        g.y += R[a] * P.y();
        J(0, 0) += Rxi[a] * P.x();
        J(0, 1) += Reta[a] * P.x();
        J(1, 0) += Rxi[a] * P.y();
        J(1, 1) += Reta[a] * P.y();
        Gx(0, 0) += Rxixi[a] * P.x();
        Gx(0, 1) += Rxieta[a] * P.x();
        Gx(1, 1) += Retaeta[a] * P.x();
        Gy(0, 0) += Rxixi[a] * P.y();
        Gy(0, 1) += Rxieta[a] * P.y();
        Gy(1, 1) += Retaeta[a] * P.y();
    }
    Gx(1, 0) = Gx(0, 1);
    Gy(1, 0) = Gy(0, 1);

    g.jacobian = J;
    g.det_j = J.determinant();
    const double scale = J.cwiseAbs().maxCoeff();
    if (!(g.det_j > 1e-14 * scale * scale)) {
        std::ostringstream os;
        os << "singular or inverted geometry map (det J = " << g.det_j << ") in span (" << bx.span << ", "
           << by.span << ") at (" << xi << ", " << eta << ")";
        throw GeometryError(os.str());
    }
    const Eigen::Matrix2d Jinv = J.inverse();
    const Eigen::Matrix2d JinvT = Jinv.transpose();

    g.N = R;
    g.dNdx.resize(nloc);
    g.dNdy.resize(nloc);
    g.d2Ndxx.resize(nloc);
    g.d2Ndxy.resize(nloc);
    g.d2Ndyy.resize(nloc);
    for (int a = 0; a < nloc; ++a) {
        const Eigen::Vector2d grad = JinvT * Eigen::Vector2d(Rxi[a], Reta[a]);
        g.dNdx[a] = grad.x();
        g.dNdy[a] = grad.y();
        Eigen::Matrix2d Hp;
        Hp << Rxixi[a], Rxieta[a], Rxieta[a], Retaeta[a];
        const Eigen::Matrix2d Hx = JinvT * (Hp - grad.x() * Gx - grad.y() * Gy) * Jinv;
        g.d2Ndxx[a] = Hx(0, 0);
        g.d2Ndxy[a] = 0.5 * (Hx(0, 1) + Hx(1, 0));
        g.d2Ndyy[a] = Hx(1, 1);
    }
    return g;
}

}  // namespace pf4
