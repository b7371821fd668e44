#include "pf4/assembly.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

namespace pf4 {

int default_thread_count()
{
    if (const char* env = std::getenv("PF4_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ElementKernels element_kernels(const QuadPoint& qp)
{
    const auto n = qp.N.size();
    ElementKernels k;
    k.Bu = Eigen::MatrixXd::Zero(3, 2 * n);
    k.Bphi.resize(2, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        k.Bu(0, 2 * a) = qp.dNdx[a];
        k.Bu(1, 2 * a + 1) = qp.dNdy[a];
        k.Bu(2, 2 * a) = qp.dNdy[a];
        k.Bu(2, 2 * a + 1) = qp.dNdx[a];
        k.Bphi(0, a) = qp.dNdx[a];
        k.Bphi(1, a) = qp.dNdy[a];
    }
    k.Dphi = qp.lap.transpose();
    k.N = qp.N.transpose();
    k.weight = qp.weight;
    return k;
}

namespace {

struct Coefficients {
    double grad;  // multiplier of Gc l0 / c_alpha on grad phi . grad dphi
    double lap;   // multiplier of Gc l0^3 / (8 c_alpha) on lap phi lap dphi
};

Coefficients phase_coefficients(const MaterialModel& mat)
{
    // Second order: d/dphi of l0 |grad phi|^2 gives 2 l0.
    if (mat.params.order == ModelOrder::Second) return {2.0, 0.0};
    return {1.0, 1.0};
}

inline Eigen::Matrix2d qp_strain(const QuadPoint& q, const Eigen::VectorXd& ue)
{
    double exx = 0, eyy = 0, gxy = 0;
    for (Eigen::Index a = 0; a < q.N.size(); ++a) {
        const double ux = ue[2 * a], uy = ue[2 * a + 1];
        exx += q.dNdx[a] * ux;
        eyy += q.dNdy[a] * uy;
        gxy += q.dNdy[a] * ux + q.dNdx[a] * uy;
    }
    Eigen::Matrix2d e;
    e << exx, 0.5 * gxy, 0.5 * gxy, eyy;
    return e;
}

void evaluate_element(const Element& el, const Eigen::VectorXd& ue, const Eigen::VectorXd& pe,
                      const QuadPointState* states, const MaterialModel& mat, HistoryMode mode,
                      ElementResiduals* res, ElementTangents* tan)
{
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    const double Gc = mat.params.Gc, l0 = mat.params.l0, ca = mat.c_alpha;
    const auto coef = phase_coefficients(mat);
    const double kg = coef.grad * Gc * l0 / ca;
    const double kl = coef.lap * Gc * l0 * l0 * l0 / (8.0 * ca);
    const double kloc = Gc / (ca * l0);

    if (res) {
        res->ru = Eigen::VectorXd::Zero(2 * n);
        res->rphi = Eigen::VectorXd::Zero(n);
    }
    if (tan) {
        tan->uu = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        tan->uphi = Eigen::MatrixXd::Zero(2 * n, n);
        tan->phiu = Eigen::MatrixXd::Zero(n, 2 * n);
        tan->phiphi = Eigen::MatrixXd::Zero(n, n);
    }

    Eigen::MatrixXd Bu = Eigen::MatrixXd::Zero(3, 2 * n);
    for (std::size_t iq = 0; iq < el.qps.size(); ++iq) {
        const QuadPoint& q = el.qps[iq];
        const double w = q.weight;
        for (Eigen::Index a = 0; a < n; ++a) {
            Bu(0, 2 * a) = q.dNdx[a];
            Bu(1, 2 * a + 1) = q.dNdy[a];
            Bu(2, 2 * a) = q.dNdy[a];
            Bu(2, 2 * a + 1) = q.dNdx[a];
        }
        const Eigen::Matrix2d eps = qp_strain(q, ue);
        const double phi = q.N.dot(pe);
        const double phx = q.dNdx.dot(pe), phy = q.dNdy.dot(pe);
        const double lap = q.lap.dot(pe);

        const auto st = stress(eps, phi, mat);
        const auto g = degradation_fn(phi, mat);
        const double ad1 = mat.chi + 2.0 * (1.0 - mat.chi) * phi;
        const double ad2 = 2.0 * (1.0 - mat.chi);
        const double excess = phi < 0.0 ? phi : (phi > 1.0 ? phi - 1.0 : 0.0);
        const double kpen = excess != 0.0 ? mat.bound_penalty : 0.0;

        double H = states[iq].H;
        bool active_history = false;
        if (mode == HistoryMode::PerIteration) {
            const double trial = driving_force(eps, mat);
            if (trial > H) {
                H = trial;
                active_history = true;
            }
        }

        if (res) {
            const Eigen::Vector3d sv = to_voigt_stress(st.sigma);
            res->ru.noalias() += w * (Bu.transpose() * sv);
            const double local = kloc * ad1 + g.d1 * H + mat.bound_penalty * excess;
            res->rphi.noalias() += w * (local * q.N + kg * (phx * q.dNdx + phy * q.dNdy) + kl * lap * q.lap);
        }
        if (tan) {
            const Eigen::Matrix3d C = material_tangent(eps, phi, mat);
            tan->uu.noalias() += w * (Bu.transpose() * (C * Bu));
            const Eigen::Vector3d sp = to_voigt_stress(st.plus);
            tan->uphi.noalias() += (w * g.d1) * (Bu.transpose() * sp) * q.N.transpose();
            if (active_history) {
                const Eigen::Vector3d dH = driving_force_gradient(eps, mat);
                tan->phiu.noalias() += (w * g.d1) * q.N * (dH.transpose() * Bu);
            }
            const double m = g.d2 * H + ad2 * kloc + kpen;
            tan->phiphi.noalias() += w * (m * q.N * q.N.transpose() +
                                          kg * (q.dNdx * q.dNdx.transpose() + q.dNdy * q.dNdy.transpose()) +
                                          kl * q.lap * q.lap.transpose());
        }
    }
}

}  // namespace

ElementResiduals element_residuals(const Element& el, const Eigen::VectorXd& u_e, const Eigen::VectorXd& phi_e,
                                   const QuadPointState* states, const MaterialModel& mat, HistoryMode mode)
{
    ElementResiduals r;
    evaluate_element(el, u_e, phi_e, states, mat, mode, &r, nullptr);
    return r;
}

ElementTangents element_tangents(const Element& el, const Eigen::VectorXd& u_e, const Eigen::VectorXd& phi_e,
                                 const QuadPointState* states, const MaterialModel& mat, HistoryMode mode)
{
    ElementTangents t;
    evaluate_element(el, u_e, phi_e, states, mat, mode, nullptr, &t);
    return t;
}

CondensedSystem condense(const AssembledSystem& sys, const std::vector<int>& constrained, bool with_matrix)
{
    const int ndof = sys.num_u + sys.num_phi;
    std::vector<int> map(ndof, 0);
    for (int d : constrained) map[d] = -1;
    CondensedSystem c;
    for (int d = 0; d < ndof; ++d) {
        if (map[d] == 0) {
            map[d] = static_cast<int>(c.free_dofs.size());
            c.free_dofs.push_back(d);
            if (d < sys.num_u) ++c.num_free_u;
        }
    }
    const auto nf = static_cast<Eigen::Index>(c.free_dofs.size());
    c.r.resize(nf);
    for (Eigen::Index i = 0; i < nf; ++i) c.r[i] = sys.r[c.free_dofs[i]];
    if (!with_matrix) return c;

    // Column-wise copy keeps the stored order (and hence the result) fixed.
    // Free dofs are ascending, so mapped rows stay sorted within a column.
    Eigen::Index total = 0;
    for (Eigen::Index j = 0; j < nf; ++j) {
        for (SparseMatrix::InnerIterator it(sys.K, c.free_dofs[j]); it; ++it) {
            if (map[it.row()] >= 0) ++total;
        }
    }
    c.K.resize(nf, nf);
    c.K.reserve(total);
    for (Eigen::Index j = 0; j < nf; ++j) {
        c.K.startVec(j);
        for (SparseMatrix::InnerIterator it(sys.K, c.free_dofs[j]); it; ++it) {
            const int i = map[it.row()];
            if (i >= 0) c.K.insertBack(i, j) = it.value();
        }
    }
    c.K.finalize();
    c.K.makeCompressed();
    return c;
}

Assembler::Assembler(const Mesh& mesh, const MaterialModel& mat, const BoundaryConditions& bcs, HistoryMode mode,
                     int threads)
    : mesh_(mesh), mat_(mat), bcs_(bcs), mode_(mode), threads_(threads > 0 ? threads : default_thread_count())
{
    build_pattern();
    build_external_force();
}

void Assembler::build_pattern()
{
    const int ndof = mesh_.num_dofs();
    const int nu = mesh_.num_u_dofs();
    std::vector<std::vector<int>> cols(ndof);
    for (const auto& el : mesh_.elements()) {
        auto ud = mesh_.element_u_dofs(el);
        auto pd = mesh_.element_phi_dofs(el);
        std::vector<int> all = ud;
        all.insert(all.end(), pd.begin(), pd.end());
        for (int j : all) {
            auto& c = cols[j];
            for (int i : all) {
                // phi rows do not depend on u while the history is frozen
                if (mode_ == HistoryMode::PerStep && i >= nu && j < nu) continue;
                c.push_back(i);
            }
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    std::size_t total = 0;
    for (auto& c : cols) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        total += c.size();
    }
    trip.reserve(total);
    for (int j = 0; j < ndof; ++j) {
        for (int i : cols[j]) trip.emplace_back(i, j, 0.0);
    }
    pattern_.resize(ndof, ndof);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();
}

void Assembler::build_external_force()
{
    f_ext_ = Eigen::VectorXd::Zero(mesh_.num_u_dofs());
    const Eigen::Vector2d& b = bcs_.body_force;
    if (b.squaredNorm() > 0.0) {
        for (const auto& el : mesh_.elements()) {
            const auto dofs = mesh_.element_u_dofs(el);
            for (const auto& q : el.qps) {
                for (Eigen::Index a = 0; a < q.N.size(); ++a) {
                    f_ext_[dofs[2 * a]] += q.weight * q.N[a] * b.x();
                    f_ext_[dofs[2 * a + 1]] += q.weight * q.N[a] * b.y();
                }
            }
        }
    }
    if (bcs_.tractions.empty()) return;

    const auto& patch = mesh_.patch();
    const auto& kx = patch.kv_xi();
    const auto& ky = patch.kv_eta();
    std::set<std::pair<int, int>> active;
    for (const auto& el : mesh_.elements()) active.emplace(el.span_xi, el.span_eta);
    const auto rule = gauss_rule(mesh_.quad_points_per_dir());
    const auto sx = kx.nonempty_spans();
    const auto sy = ky.nonempty_spans();

    for (const auto& tr : bcs_.tractions) {
        const bool horizontal = tr.edge == Edge::Bottom || tr.edge == Edge::Top;
        const auto& spans = horizontal ? sx : sy;
        const auto& kv = horizontal ? kx : ky;
        for (int s : spans) {
            int spx = 0, spy = 0;
            double fixed = 0.0;
            switch (tr.edge) {
            case Edge::Bottom: spx = s, spy = sy.front(), fixed = ky.front(); break;
            case Edge::Top: spx = s, spy = sy.back(), fixed = ky.back(); break;
            case Edge::Left: spx = sx.front(), spy = s, fixed = kx.front(); break;
            case Edge::Right: spx = sx.back(), spy = s, fixed = kx.back(); break;
            }
            if (!active.count({spx, spy})) continue;
            const double t0 = kv.knots()[s], t1 = kv.knots()[s + 1];
            for (std::size_t k = 0; k < rule.points.size(); ++k) {
                const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * rule.points[k];
                const auto g = horizontal ? geometry_map(patch, t, fixed) : geometry_map(patch, fixed, t);
                const Eigen::Vector2d tangent = horizontal ? g.jacobian.col(0) : g.jacobian.col(1);
                const double ds = rule.weights[k] * 0.5 * (t1 - t0) * tangent.norm();
                for (std::size_t a = 0; a < g.active.size(); ++a) {
                    const int node = mesh_.node_of_cp(g.active[a]);
                    if (node < 0 || g.N[a] == 0.0) continue;
                    f_ext_[2 * node] += ds * g.N[a] * tr.t.x();
                    f_ext_[2 * node + 1] += ds * g.N[a] * tr.t.y();
                }
            }
        }
    }
}

void Assembler::gather(const Element& el, const Eigen::VectorXd& u, const Eigen::VectorXd& phi, Eigen::VectorXd& ue,
                       Eigen::VectorXd& pe) const
{
    const auto n = static_cast<Eigen::Index>(el.cps.size());
    ue.resize(2 * n);
    pe.resize(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const int node = mesh_.node_of_cp(el.cps[a]);
        ue[2 * a] = u[2 * node];
        ue[2 * a + 1] = u[2 * node + 1];
        pe[a] = phi[node];
    }
}

AssembledSystem Assembler::assemble(const Eigen::VectorXd& u, const Eigen::VectorXd& phi,
                                    const std::vector<QuadPointState>& states, bool with_matrix) const
{
    const int nu = mesh_.num_u_dofs();
    const int np = mesh_.num_nodes();
    if (u.size() != nu || phi.size() != np || static_cast<int>(states.size()) != mesh_.num_qps()) {
        throw std::invalid_argument("state dimensions do not match the mesh dof map");
    }
    AssembledSystem sys;
    sys.num_u = nu;
    sys.num_phi = np;
    sys.r = Eigen::VectorXd::Zero(nu + np);
    sys.r.head(nu) = -f_ext_;
    if (with_matrix) {
        sys.K = pattern_;
        std::fill(sys.K.valuePtr(), sys.K.valuePtr() + sys.K.nonZeros(), 0.0);
    }

    const auto& elements = mesh_.elements();
    const int ne = static_cast<int>(elements.size());
    constexpr int batch = 256;
    std::vector<ElementResiduals> res(batch);
    std::vector<ElementTangents> tan(batch);

    auto work = [&](int begin, int end, int tid, int nthreads) {
        Eigen::VectorXd ue, pe;
        for (int e = begin + tid; e < end; e += nthreads) {
            const auto& el = elements[e];
            gather(el, u, phi, ue, pe);
            evaluate_element(el, ue, pe, &states[mesh_.qp_offset(e)], mat_, mode_, &res[e - begin],
                             with_matrix ? &tan[e - begin] : nullptr);
        }
    };

    std::vector<int> dofs;
    for (int begin = 0; begin < ne; begin += batch) {
        const int end = std::min(ne, begin + batch);
        const int nt = std::min(threads_, end - begin);
        if (nt <= 1) {
            work(begin, end, 0, 1);
        } else {
            std::vector<std::jthread> pool;
            for (int t = 0; t < nt; ++t) pool.emplace_back(work, begin, end, t, nt);
        }
        for (int e = begin; e < end; ++e) {
            const auto& el = elements[e];
            dofs = mesh_.element_u_dofs(el);
            const auto pd = mesh_.element_phi_dofs(el);
            dofs.insert(dofs.end(), pd.begin(), pd.end());
            const auto n = static_cast<Eigen::Index>(el.cps.size());
            const auto& re = res[e - begin];
            for (Eigen::Index a = 0; a < 2 * n; ++a) sys.r[dofs[a]] += re.ru[a];
            for (Eigen::Index a = 0; a < n; ++a) sys.r[dofs[2 * n + a]] += re.rphi[a];
            if (!with_matrix) continue;

            const auto& te = tan[e - begin];
            auto local = [&](Eigen::Index i, Eigen::Index j) {
                if (i < 2 * n) return j < 2 * n ? te.uu(i, j) : te.uphi(i, j - 2 * n);
                return j < 2 * n ? te.phiu(i - 2 * n, j) : te.phiphi(i - 2 * n, j - 2 * n);
            };
            const int* inner = sys.K.innerIndexPtr();
            const int* outer = sys.K.outerIndexPtr();
            double* values = sys.K.valuePtr();
            for (Eigen::Index j = 0; j < 3 * n; ++j) {
                const int J = dofs[j];
                const int* cb = inner + outer[J];
                const int* ce = inner + outer[J + 1];
                for (Eigen::Index i = 0; i < 3 * n; ++i) {
                    const int I = dofs[i];
                    if (mode_ == HistoryMode::PerStep && I >= nu && J < nu) continue;
                    const int* pos = std::lower_bound(cb, ce, I);
                    values[pos - inner] += local(i, j);
                }
            }
        }
    }
    return sys;
}

double Assembler::displacement_energy(const Eigen::VectorXd& u, const Eigen::VectorXd& phi) const
{
    double energy = 0.0;
    Eigen::VectorXd ue, pe;
    for (const auto& el : mesh_.elements()) {
        gather(el, u, phi, ue, pe);
        for (const auto& q : el.qps) {
            const auto eps = qp_strain(q, ue);
            const auto psi = energy_split(eps, mat_);
            energy += q.weight * (degradation_fn(q.N.dot(pe), mat_).g * psi.plus + psi.minus);
        }
    }
    return energy - f_ext_.dot(u);
}

double Assembler::phase_energy(const Eigen::VectorXd& phi, const std::vector<QuadPointState>& states) const
{
    const double Gc = mat_.params.Gc, l0 = mat_.params.l0, ca = mat_.c_alpha;
    const bool fourth = mat_.params.order == ModelOrder::Fourth;
    double energy = 0.0;
    Eigen::VectorXd ue, pe;
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(mesh_.num_u_dofs());
    const auto& elements = mesh_.elements();
    for (std::size_t e = 0; e < elements.size(); ++e) {
        const auto& el = elements[e];
        gather(el, u0, phi, ue, pe);
        for (std::size_t iq = 0; iq < el.qps.size(); ++iq) {
            const auto& q = el.qps[iq];
            const double p = q.N.dot(pe);
            const double gx = q.dNdx.dot(pe), gy = q.dNdy.dot(pe), lp = q.lap.dot(pe);
            const double alpha = mat_.chi * p + (1.0 - mat_.chi) * p * p;
            const double grad2 = gx * gx + gy * gy;
            double density = alpha / l0;
            if (fourth) {
                density += 0.5 * l0 * grad2 + l0 * l0 * l0 / 16.0 * lp * lp;
            } else {
                density += l0 * grad2;
            }
            const double H = states[mesh_.qp_offset(static_cast<int>(e)) + iq].H;
            const double excess = p < 0.0 ? p : (p > 1.0 ? p - 1.0 : 0.0);
            energy += q.weight * (Gc / ca * density + degradation_fn(p, mat_).g * H +
                                  0.5 * mat_.bound_penalty * excess * excess);
        }
    }
    return energy;
}

std::vector<Eigen::Matrix2d> Assembler::strains(const Eigen::VectorXd& u) const
{
    std::vector<Eigen::Matrix2d> out(mesh_.num_qps());
    Eigen::VectorXd ue, pe;
    const Eigen::VectorXd p0 = Eigen::VectorXd::Zero(mesh_.num_nodes());
    const auto& elements = mesh_.elements();
    for (std::size_t e = 0; e < elements.size(); ++e) {
        gather(elements[e], u, p0, ue, pe);
        for (std::size_t iq = 0; iq < elements[e].qps.size(); ++iq) {
            out[mesh_.qp_offset(static_cast<int>(e)) + iq] = qp_strain(elements[e].qps[iq], ue);
        }
    }
    return out;
}

Eigen::VectorXd Assembler::phase_at_qps(const Eigen::VectorXd& phi) const
{
    Eigen::VectorXd out(mesh_.num_qps());
    const auto& elements = mesh_.elements();
    for (std::size_t e = 0; e < elements.size(); ++e) {
        const auto& el = elements[e];
        Eigen::VectorXd pe(el.cps.size());
        for (std::size_t a = 0; a < el.cps.size(); ++a) pe[a] = phi[mesh_.node_of_cp(el.cps[a])];
        for (std::size_t iq = 0; iq < el.qps.size(); ++iq) {
            out[mesh_.qp_offset(static_cast<int>(e)) + iq] = el.qps[iq].N.dot(pe);
        }
    }
    return out;
}

}  // namespace pf4
