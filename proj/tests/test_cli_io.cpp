#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "pf4/config.hpp"
#include "pf4/output.hpp"
#include "pf4/verify.hpp"

using namespace pf4;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name)
{
    fs::path dir(PF4_TEST_TMP);
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

// Strict reader for the legacy ASCII unstructured-grid subset we emit.
struct VtkFile {
    std::size_t points = 0, cells = 0;
    std::vector<double> coords, phi, disp;
    std::vector<std::vector<long>> connectivity;
    std::vector<int> types;
};

VtkFile parse_vtk_strict(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw std::runtime_error("unexpected end of file");
        if (!line.empty() && line.back() == '\r') throw std::runtime_error("CR line ending");
        return line;
    };
    auto expect = [](bool ok, const std::string& what) {
        if (!ok) throw std::runtime_error(what);
    };
    VtkFile f;
    expect(next_line() == "# vtk DataFile Version 3.0", "bad version line");
    expect(next_line().size() <= 256, "title too long");
    expect(next_line() == "ASCII", "not ASCII");
    expect(next_line() == "DATASET UNSTRUCTURED_GRID", "not an unstructured grid");

    std::string kw, type;
    in >> kw >> f.points >> type;
    expect(kw == "POINTS" && (type == "double" || type == "float"), "bad POINTS header");
    f.coords.resize(3 * f.points);
    for (auto& c : f.coords) expect(static_cast<bool>(in >> c), "short POINTS block");

    std::size_t size = 0;
    in >> kw >> f.cells >> size;
    expect(kw == "CELLS", "missing CELLS");
    std::size_t counted = 0;
    for (std::size_t c = 0; c < f.cells; ++c) {
        long n = 0;
        expect(static_cast<bool>(in >> n) && n > 0, "bad cell size");
        std::vector<long> ids(n);
        for (auto& id : ids) {
            expect(static_cast<bool>(in >> id), "short cell");
            expect(id >= 0 && static_cast<std::size_t>(id) < f.points, "point index out of range");
        }
        counted += 1 + n;
        f.connectivity.push_back(ids);
    }
    expect(counted == size, "CELLS size mismatch");

    std::size_t ntypes = 0;
    in >> kw >> ntypes;
    expect(kw == "CELL_TYPES" && ntypes == f.cells, "bad CELL_TYPES");
    for (std::size_t c = 0; c < ntypes; ++c) {
        int t = 0;
        expect(static_cast<bool>(in >> t), "short CELL_TYPES");
        expect(t != 9 || f.connectivity[c].size() == 4, "quad with wrong vertex count");
        f.types.push_back(t);
    }

    std::size_t npd = 0;
    in >> kw >> npd;
    expect(kw == "POINT_DATA" && npd == f.points, "bad POINT_DATA");
    while (in >> kw) {
        if (kw == "SCALARS") {
            std::string name, dtype;
            in >> name >> dtype;
            std::getline(in, line);  // optional component count
            in >> kw;
            expect(kw == "LOOKUP_TABLE", "missing LOOKUP_TABLE");
            in >> kw;
            expect(name == "phi", "unexpected scalar " + name);
            f.phi.resize(f.points);
            for (auto& v : f.phi) expect(static_cast<bool>(in >> v), "short scalars");
        } else if (kw == "VECTORS") {
            std::string name, dtype;
            in >> name >> dtype;
            expect(name == "displacement", "unexpected vectors " + name);
            f.disp.resize(3 * f.points);
            for (auto& v : f.disp) expect(static_cast<bool>(in >> v), "short vectors");
        } else {
            throw std::runtime_error("unknown section " + kw);
        }
    }
    expect(f.phi.size() == f.points && f.disp.size() == 3 * f.points, "missing point data");
    return f;
}

}  // namespace

TEST_CASE("three-point bending preset values")
{
    const auto c = preset_config("beam_3pb_symmetric");
    const auto& m = c.material.params;
    CHECK(m.E0 == 20000.0);
    CHECK(m.nu == 0.2);
    CHECK(m.Gc == 0.113);
    CHECK(m.ft == 2.4);
    CHECK(m.l0 == 2.5);
    CHECK(c.schedule.du == 0.01);
    CHECK(c.schedule.max_steps == 100);
    CHECK(c.material.thickness == 100.0);
    CHECK(m.order == ModelOrder::Fourth);
    CHECK(c.mesh.h == doctest::Approx(m.l0 / 2));
}

TEST_CASE("L-panel preset values and length-scale variants")
{
    const auto c = preset_config("l_panel");
    const auto& m = c.material.params;
    CHECK(m.E0 == 20000.0);
    CHECK(m.nu == 0.18);
    CHECK(m.ft == 2.5);
    CHECK(m.Gc == 0.13);
    CHECK(m.l0 == 7.5);
    CHECK(c.schedule.du == 0.02);
    CHECK(c.material.thickness == 100.0);
    for (double l0 : {2.5, 5.0, 7.5, 10.0}) {
        std::ostringstream name;
        name << "l_panel_l0_" << std::fixed;
        name.precision(1);
        name << l0;
        CHECK(preset_config(name.str()).material.params.l0 == l0);
    }
}

TEST_CASE("mixed-mode beam preset values")
{
    const auto c = preset_config("beam_3pb_mixed");
    const auto& m = c.material.params;
    CHECK(m.E0 == 33800.0);
    CHECK(m.nu == 0.2);
    CHECK(m.ft == 3.5);
    CHECK(m.Gc == 0.08);
    CHECK(m.l0 == doctest::Approx(0.001 * 80));
    CHECK(c.schedule.du == 0.001);
    REQUIRE(c.schedule.cmod_target);
    CHECK(*c.schedule.cmod_target == 0.6);
    CHECK(c.material.thickness == 50.0);
    REQUIRE(c.gauge);
    CHECK(preset_config("beam_3pb_mixed_H320_a0.625").material.params.l0 == doctest::Approx(0.32));
}

TEST_CASE("preset listing covers every benchmark")
{
    std::vector<std::string> names;
    for (const auto& p : list_presets()) {
        names.push_back(p.name);
        CHECK_FALSE(p.description.empty());
        CHECK_NOTHROW(preset_config(p.name));
    }
    auto has = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
    CHECK(has("beam_3pb_symmetric"));
    CHECK(has("l_panel"));
    for (const char* l0 : {"2.5", "5.0", "7.5", "10.0"}) CHECK(has(std::string("l_panel_l0_") + l0));
    CHECK(has("beam_3pb_mixed"));
    for (const char* H : {"80", "160", "320"})
        for (const char* a : {"0", "0.3125", "0.625"}) CHECK(has(std::string("beam_3pb_mixed_H") + H + "_a" + a));
    CHECK(has("tension_bar"));
    CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("config round trip for every preset")
{
    for (const auto& p : list_presets()) {
        const auto c = preset_config(p.name);
        CHECK(parse_config(serialize_config(c)) == c);
    }
    auto c = tension_bar(5.0, ModelOrder::Second);
    c.solver.history = HistoryMode::PerIteration;
    c.geometry.cutouts.push_back({1, 2, 0, 1});
    c.output.snapshot_interval = 7;
    CHECK(parse_config(serialize_config(c)) == c);
}

TEST_CASE("defaults fill missing keys")
{
    auto c = parse_config(serialize_config(tension_bar()));
    const auto json = R"({"geometry": {"lx": 10, "ly": 1},
        "mesh": {"coarse_hx": 1, "coarse_hy": 1, "h": 1},
        "boundary": {"drive": {"edge": "right", "component": "x"},
                     "constraints": [{"edge": "left", "x": true, "y": true}]}})";
    c = parse_config(json);
    CHECK(c.material.params == MaterialParams{});
    CHECK(c.solver.tol == 1e-4);
    CHECK(c.solver.max_iter == 50);
    CHECK(c.output.vtk_samples == 2);
}

TEST_CASE("unknown keys are rejected with their path")
{
    auto text = serialize_config(tension_bar());
    text.replace(text.find("\"Gc\""), 4, "\"Gx\"");
    const auto msg = error_of([&] { parse_config(text); });
    CHECK(msg.find("material.Gx") != std::string::npos);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("physical invariants are validated with path-qualified messages")
{
    const auto base = tension_bar();
    CHECK(error_of([&] { apply_override(base, "material.l0=-1"); }).rfind("material.l0", 0) == 0);
    CHECK(error_of([&] { apply_override(base, "material.nu=0.5"); }).rfind("material.nu", 0) == 0);
    CHECK(error_of([&] { apply_override(base, "material.E0=0"); }).rfind("material.E0", 0) == 0);
    CHECK(error_of([&] { apply_override(base, "schedule.du=-0.1"); }).rfind("schedule.du", 0) == 0);
    CHECK(error_of([&] { apply_override(base, "mesh.degree=1"); }).rfind("mesh.degree", 0) == 0);
    CHECK(error_of([&] { apply_override(base, "material.softening=\"plastic\""); }).rfind("material.softening", 0) == 0);
}

TEST_CASE("dot-path overrides")
{
    const auto base = preset_config("beam_3pb_symmetric");
    auto c = apply_override(base, "material.l0=5");
    CHECK(c.material.params.l0 == 5.0);
    c = apply_override(c, "material.order=second");
    CHECK(c.material.params.order == ModelOrder::Second);
    c = apply_override(c, "boundary.constraints.1.value=0.5");
    CHECK(c.boundary.constraints[1].value == 0.5);
    c = apply_override(c, "output.directory=results/run 1");
    CHECK(c.output.directory == "results/run 1");
    CHECK_THROWS_AS(apply_override(base, "material.l0"), ConfigError);
    CHECK_THROWS_AS(apply_override(base, "nothing.here=1"), ConfigError);
}

TEST_CASE("coarse mesh warning")
{
    auto c = tension_bar();
    CHECK(config_warnings(c).empty());
    c.mesh.h = 3 * c.material.params.l0;
    CHECK_FALSE(config_warnings(c).empty());
}

TEST_CASE("built problem resolves selectors")
{
    const auto c = preset_config("beam_3pb_symmetric");
    const auto b = build_problem(c);
    CHECK(b.bcs.driven_dofs().size() == 1);
    CHECK(b.bcs.support_dofs().size() == 3);
    CHECK(b.gauge.has_value());
    CHECK(b.material.a1 == doctest::Approx(4 * 392.36 / (3.14159265358979 * 2.5)).epsilon(1e-5));
    CHECK(b.bcs.drive_sign == -1.0);
}

TEST_CASE("empty curve writes the header only")
{
    const auto p = tmp("empty.csv");
    write_curve_csv({}, p.string());
    CHECK(slurp(p) == std::string(kCurveHeader) + "\n");
    CHECK(read_curve_csv(p.string()).empty());
}

TEST_CASE("curve rows round trip at the printed precision")
{
    CurveRow r;
    r.step = 3;
    r.applied = 0.03;
    r.reaction = 1234.5678901234;
    r.cmod = std::numeric_limits<double>::quiet_NaN();
    r.iterations = 4;
    CurveRow h = r;
    h.step = 4;
    h.status = StepStatus::Halved;
    h.cmod = 0.00123;
    const auto p = tmp("curve.csv");
    write_curve_csv({r, h}, p.string());
    const auto text = slurp(p);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find(",halved\n") != std::string::npos);
    const auto back = read_curve_csv(p.string());
    REQUIRE(back.size() == 2);
    CHECK(format_curve_row(back[0]) == format_curve_row(r));
    CHECK(format_curve_row(back[1]) == format_curve_row(h));
    CHECK(back[1].status == StepStatus::Halved);
    CHECK(std::isnan(back[0].cmod));
    CHECK(parse_curve_row(format_curve_row(h)).reaction == doctest::Approx(h.reaction).epsilon(1e-10));
}

TEST_CASE("incremental curve writer flushes every row")
{
    const auto p = tmp("incremental.csv");
    CurveWriter w(p.string());
    CurveRow r;
    r.step = 1;
    w.append(r);
    CHECK(read_curve_csv(p.string()).size() == 1);
    r.step = 2;
    w.append(r);
    CHECK(read_curve_csv(p.string()).size() == 2);
}

TEST_CASE("single-element VTK snapshot")
{
    const Mesh m = uniform_mesh(2, 1, 1, 1, 1);
    MaterialModel mat;
    SimState s;
    s.u = Eigen::VectorXd::Zero(m.num_u_dofs());
    s.phi = Eigen::VectorXd::Constant(m.num_nodes(), 0.25);
    for (int n = 0; n < m.num_nodes(); ++n) s.u[m.dof(n, Field::Ux)] = 0.1 * m.patch().control_points()[m.cp_of_node(n)].x();
    const auto p = tmp("one.vtk");
    write_vtk(s, m, p.string(), 2);
    const auto f = parse_vtk_strict(slurp(p));
    CHECK(f.points == 4);
    CHECK(f.cells == 1);
    CHECK(f.types[0] == 9);
    for (double v : f.phi) CHECK(v == doctest::Approx(0.25));
    for (std::size_t i = 0; i < f.points; ++i) CHECK(f.disp[3 * i] == doctest::Approx(0.1 * f.coords[3 * i]));
}

TEST_CASE("undamaged snapshot has an all-zero phase array and parses strictly")
{
    const Mesh m = uniform_mesh(3, 3, 2, 3, 2);
    SimState s;
    s.u = Eigen::VectorXd::Zero(m.num_u_dofs());
    s.phi = Eigen::VectorXd::Zero(m.num_nodes());
    const auto p = tmp("zero.vtk");
    write_vtk(s, m, p.string(), 3);
    const auto f = parse_vtk_strict(slurp(p));
    CHECK(f.points == 6 * 9);
    CHECK(f.cells == 6 * 4);
    for (double v : f.phi) CHECK(v == 0.0);
}

TEST_CASE("the strict VTK checker rejects malformed files")
{
    const Mesh m = uniform_mesh(2, 1, 1, 1, 1);
    SimState s;
    s.u = Eigen::VectorXd::Zero(m.num_u_dofs());
    s.phi = Eigen::VectorXd::Zero(m.num_nodes());
    const auto p = tmp("bad.vtk");
    write_vtk(s, m, p.string());
    auto text = slurp(p);
    CHECK_NOTHROW(parse_vtk_strict(text));
    auto broken = text;
    broken.replace(broken.find("CELLS 1 5"), 9, "CELLS 1 6");
    CHECK_THROWS(parse_vtk_strict(broken));
    CHECK_THROWS(parse_vtk_strict(text.substr(0, text.size() / 2)));
}

TEST_CASE("profile CSV")
{
    const auto p = tmp("profile.csv");
    write_profile_csv(profile_second_order(1.0, 2.0, 50), p.string());
    const auto text = slurp(p);
    CHECK(text.rfind("x_mm,phi,dphi,d2phi\n", 0) == 0);
    CHECK(text.find("gamma") != std::string::npos);
}
