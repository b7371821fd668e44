#include "pf4/output.hpp"

#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <locale>
#include <sstream>
#include <vector>

namespace pf4 {

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

std::FILE* open_or_throw(const std::string& path, const char* mode)
{
    std::FILE* f = std::fopen(path.c_str(), mode);
    if (!f) throw IoError("cannot open " + path + ": " + std::strerror(errno));
    return f;
}

void put(std::FILE* f, const std::string& s, const std::string& path)
{
    if (std::fwrite(s.data(), 1, s.size(), f) != s.size()) throw IoError("write failed: " + path);
}

StepStatus status_from_string(const std::string& s)
{
    if (s == "converged") return StepStatus::Converged;
    if (s == "halved") return StepStatus::Halved;
    if (s == "failed") return StepStatus::Failed;
    throw IoError("unknown step status: " + s);
}

// Locale-independent: the stream is imbued with the classic locale.
double parse_double(const std::string& s)
{
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    double v;
    if (s == "nan" || s == "-nan") return std::nan("");
    is >> v;
    if (is.fail()) throw IoError("bad number in curve file: " + s);
    return v;
}

}  // namespace

std::string format_curve_row(const CurveRow& r)
{
    std::string s = std::to_string(r.step);
    s += ',' + fmt(r.applied) + ',' + fmt(r.reaction) + ',' + fmt(r.cmod) + ',' + std::to_string(r.iterations) + ',';
    s += to_string(r.status);
    return s;
}

CurveRow parse_curve_row(const std::string& line)
{
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 6) throw IoError("curve row must have 6 fields: " + line);
    CurveRow r;
    r.step = std::stoi(f[0]);
    r.applied = parse_double(f[1]);
    r.reaction = parse_double(f[2]);
    r.cmod = parse_double(f[3]);
    r.iterations = std::stoi(f[4]);
    r.status = status_from_string(f[5]);
    return r;
}

void write_curve_csv(const LoadCurve& curve, const std::string& path)
{
    std::FILE* f = open_or_throw(path, "wb");
    std::string s = std::string(kCurveHeader) + "\n";
    for (const auto& r : curve) s += format_curve_row(r) + "\n";
    put(f, s, path);
    if (std::fclose(f) != 0) throw IoError("close failed: " + path);
}

LoadCurve read_curve_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCurveHeader) throw IoError("missing curve header in " + path);
    LoadCurve c;
    while (std::getline(in, line)) {
        if (!line.empty()) c.push_back(parse_curve_row(line));
    }
    return c;
}

CurveWriter::CurveWriter(const std::string& path) : path_(path)
{
    f_ = open_or_throw(path, "wb");
    put(f_, std::string(kCurveHeader) + "\n", path_);
    std::fflush(f_);
}

CurveWriter::~CurveWriter()
{
    if (f_) std::fclose(f_);
}

void CurveWriter::append(const CurveRow& row)
{
    put(f_, format_curve_row(row) + "\n", path_);
    std::fflush(f_);
}

void write_vtk(const SimState& state, const Mesh& mesh, const std::string& path, int samples)
{
    if (samples < 2) throw std::invalid_argument("vtk sampling needs at least 2 points per direction");
    if (state.u.size() != mesh.num_u_dofs() || state.phi.size() != mesh.num_nodes()) {
        throw std::invalid_argument("snapshot does not match the mesh");
    }
    const auto& patch = mesh.patch();
    const int s = samples;
    const auto& els = mesh.elements();

    std::vector<std::array<double, 2>> pts;
    std::vector<double> phi;
    std::vector<std::array<double, 2>> disp;
    pts.reserve(els.size() * s * s);
    for (const auto& el : els) {
        for (int j = 0; j < s; ++j) {
            for (int i = 0; i < s; ++i) {
                const double xi = el.xi0 + (el.xi1 - el.xi0) * i / (s - 1);
                const double eta = el.eta0 + (el.eta1 - el.eta0) * j / (s - 1);
                const auto gp = geometry_map(patch, xi, eta);
                double p = 0, ux = 0, uy = 0;
                for (std::size_t a = 0; a < gp.active.size(); ++a) {
                    const int node = mesh.node_of_cp(gp.active[a]);
                    if (node < 0) continue;
                    const double N = gp.N[static_cast<Eigen::Index>(a)];
                    p += N * state.phi[node];
                    ux += N * state.u[2 * node];
                    uy += N * state.u[2 * node + 1];
                }
                pts.push_back({gp.x, gp.y});
                phi.push_back(p);
                disp.push_back({ux, uy});
            }
        }
    }

    std::string out;
    out.reserve(pts.size() * 96);
    out += "# vtk DataFile Version 3.0\n";
    out += "phase-field snapshot step " + std::to_string(state.step_index) + "\n";
    out += "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out += "POINTS " + std::to_string(pts.size()) + " double\n";
    for (const auto& p : pts) out += fmt(p[0]) + " " + fmt(p[1]) + " " + fmt(0.0) + "\n";
    const std::size_t cells = els.size() * (s - 1) * (s - 1);
    out += "CELLS " + std::to_string(cells) + " " + std::to_string(cells * 5) + "\n";
    for (std::size_t e = 0; e < els.size(); ++e) {
        const std::size_t base = e * s * s;
        for (int j = 0; j + 1 < s; ++j) {
            for (int i = 0; i + 1 < s; ++i) {
                const std::size_t a = base + i + s * j;
                out += "4 " + std::to_string(a) + " " + std::to_string(a + 1) + " " + std::to_string(a + 1 + s) + " " +
                       std::to_string(a + s) + "\n";
            }
        }
    }
    out += "CELL_TYPES " + std::to_string(cells) + "\n";
    for (std::size_t c = 0; c < cells; ++c) out += "9\n";
    out += "POINT_DATA " + std::to_string(pts.size()) + "\n";
    out += "SCALARS phi double 1\nLOOKUP_TABLE default\n";
    for (double v : phi) out += fmt(v) + "\n";
    out += "VECTORS displacement double\n";
    for (const auto& d : disp) out += fmt(d[0]) + " " + fmt(d[1]) + " " + fmt(0.0) + "\n";

    std::FILE* f = open_or_throw(path, "wb");
    put(f, out, path);
    if (std::fclose(f) != 0) throw IoError("close failed: " + path);
}

void write_profile_csv(const Profile1D& p, const std::string& path)
{
    std::FILE* f = open_or_throw(path, "wb");
    std::string s = "x_mm,phi,dphi,d2phi\n";
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        s += fmt(p.x[i]) + ',' + fmt(p.phi[i]) + ',' + fmt(p.dphi[i]) + ',' + fmt(p.d2phi[i]) + "\n";
    }
    s += "# gamma," + fmt(p.gamma) + "\n";
    put(f, s, path);
    if (std::fclose(f) != 0) throw IoError("close failed: " + path);
}

}  // namespace pf4
