#include "pf4/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pf4 {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what)
{
    throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + what);
}

// Strict object reader: every key must be consumed by the caller.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) fail(path_, "expected an object");
    }
    ~Obj() = default;

    const std::string& path() const { return path_; }
    bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

    const json* get(const std::string& k)
    {
        seen_.insert(k);
        if (!j_.contains(k) || j_.at(k).is_null()) return nullptr;
        return &j_.at(k);
    }

    double number(const std::string& k, double def)
    {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_number()) fail(join(path_, k), "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d)) fail(join(path_, k), "must be finite");
        return d;
    }
    std::optional<double> opt_number(const std::string& k)
    {
        if (!has(k)) {
            seen_.insert(k);
            return std::nullopt;
        }
        return number(k, 0.0);
    }
    int integer(const std::string& k, int def)
    {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_number_integer()) fail(join(path_, k), "expected an integer");
        return v->get<int>();
    }
    std::string string(const std::string& k, const std::string& def)
    {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_string()) fail(join(path_, k), "expected a string");
        return v->get<std::string>();
    }
    bool boolean(const std::string& k, bool def)
    {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_boolean()) fail(join(path_, k), "expected true or false");
        return v->get<bool>();
    }
    std::optional<std::array<double, 2>> pair(const std::string& k)
    {
        const json* v = get(k);
        if (!v) return std::nullopt;
        const auto p = join(path_, k);
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
            fail(p, "expected an array of two numbers");
        }
        return std::array<double, 2>{(*v)[0].get<double>(), (*v)[1].get<double>()};
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(join(path_, it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto enum_value(const std::string& path, const std::string& s, F&& conv)
{
    try {
        return conv(s);
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

void positive(const std::string& path, double v)
{
    if (!(v > 0.0)) fail(path, "must be positive");
}

Field component_from_string(const std::string& path, const std::string& s)
{
    if (s == "x") return Field::Ux;
    if (s == "y") return Field::Uy;
    fail(path, "component must be \"x\" or \"y\"");
}

HistoryMode history_from_string(const std::string& path, const std::string& s)
{
    if (s == "per_step") return HistoryMode::PerStep;
    if (s == "per_iteration") return HistoryMode::PerIteration;
    fail(path, "history must be \"per_step\" or \"per_iteration\"");
}

std::string_view history_name(HistoryMode m)
{
    return m == HistoryMode::PerStep ? "per_step" : "per_iteration";
}

Selector parse_selector(Obj& o)
{
    Selector s;
    if (o.has("edge")) {
        s.edge = enum_value(join(o.path(), "edge"), o.string("edge", ""), [](const std::string& v) { return edge_from_string(v); });
    } else {
        o.get("edge");
    }
    s.range = o.pair("range");
    s.point = o.pair("point");
    if (s.edge.has_value() == s.point.has_value()) fail(o.path(), "exactly one of \"edge\" or \"point\" is required");
    if (s.range && !s.edge) fail(join(o.path(), "range"), "only valid together with \"edge\"");
    if (s.range && (*s.range)[0] > (*s.range)[1]) fail(join(o.path(), "range"), "lower bound exceeds upper bound");
    return s;
}

json selector_json(const Selector& s)
{
    json j = json::object();
    j["edge"] = s.edge ? json(std::string(to_string(*s.edge))) : json(nullptr);
    j["range"] = s.range ? json(*s.range) : json(nullptr);
    j["point"] = s.point ? json(*s.point) : json(nullptr);
    return j;
}

RunConfig from_json(const json& root)
{
    RunConfig c;
    Obj top(root, "");
    c.name = top.string("name", c.name);
    c.description = top.string("description", "");

    if (const json* m = top.get("material")) {
        Obj o(*m, "material");
        auto& p = c.material.params;
        p.E0 = o.number("E0", p.E0);
        p.nu = o.number("nu", p.nu);
        p.Gc = o.number("Gc", p.Gc);
        p.ft = o.number("ft", p.ft);
        p.l0 = o.number("l0", p.l0);
        p.chi = o.number("chi", p.chi);
        p.softening = enum_value("material.softening", o.string("softening", std::string(to_string(p.softening))),
                                 [](const std::string& v) { return softening_from_string(v); });
        p.order = enum_value("material.order", o.string("order", std::string(to_string(p.order))),
                             [](const std::string& v) { return order_from_string(v); });
        p.stress_state = enum_value("material.stress_state",
                                    o.string("stress_state", std::string(to_string(p.stress_state))),
                                    [](const std::string& v) { return stress_state_from_string(v); });
        c.material.thickness = o.number("thickness", c.material.thickness);
        o.finish();
        positive("material.E0", p.E0);
        if (!(p.nu > 0.0 && p.nu < 0.5)) fail("material.nu", "must lie in (0, 0.5)");
        positive("material.Gc", p.Gc);
        positive("material.ft", p.ft);
        positive("material.l0", p.l0);
        if (!(p.chi >= 0.0 && p.chi <= 2.0)) fail("material.chi", "must lie in [0, 2]");
        positive("material.thickness", c.material.thickness);
    }

    if (const json* g = top.get("geometry")) {
        Obj o(*g, "geometry");
        auto& G = c.geometry;
        G.x0 = o.number("x0", G.x0);
        G.y0 = o.number("y0", G.y0);
        G.lx = o.number("lx", G.lx);
        G.ly = o.number("ly", G.ly);
        if (const json* cs = o.get("cutouts")) {
            if (!cs->is_array()) fail("geometry.cutouts", "expected an array");
            for (std::size_t i = 0; i < cs->size(); ++i) {
                Obj r((*cs)[i], "geometry.cutouts." + std::to_string(i));
                RemovedRegion rr{r.number("x0", 0), r.number("x1", 0), r.number("y0", 0), r.number("y1", 0)};
                r.finish();
                if (!(rr.x1 > rr.x0 && rr.y1 > rr.y0)) fail(r.path(), "cutout must have positive extent");
                G.cutouts.push_back(rr);
            }
        }
        o.finish();
        positive("geometry.lx", G.lx);
        positive("geometry.ly", G.ly);
    }

    if (const json* m = top.get("mesh")) {
        Obj o(*m, "mesh");
        auto& M = c.mesh;
        M.degree = o.integer("degree", M.degree);
        M.coarse_hx = o.number("coarse_hx", M.coarse_hx);
        M.coarse_hy = o.number("coarse_hy", M.coarse_hy);
        M.h = o.number("h", M.h);
        if (const json* bs = o.get("bands")) {
            if (!bs->is_array()) fail("mesh.bands", "expected an array");
            for (std::size_t i = 0; i < bs->size(); ++i) {
                Obj b((*bs)[i], "mesh.bands." + std::to_string(i));
                BandBlock band;
                const auto ax = b.string("axis", "x");
                if (ax == "x") band.axis = Axis::X;
                else if (ax == "y") band.axis = Axis::Y;
                else fail(join(b.path(), "axis"), "axis must be \"x\" or \"y\"");
                band.lo = b.number("lo", 0.0);
                band.hi = b.number("hi", 0.0);
                b.finish();
                if (band.hi < band.lo) fail(b.path(), "hi must not be below lo");
                M.bands.push_back(band);
            }
        }
        o.finish();
        if (M.degree < 2 || M.degree > 5) fail("mesh.degree", "must lie in [2, 5] (C1 continuity needs p >= 2)");
        positive("mesh.coarse_hx", M.coarse_hx);
        positive("mesh.coarse_hy", M.coarse_hy);
        positive("mesh.h", M.h);
    }

    if (const json* b = top.get("boundary")) {
        Obj o(*b, "boundary");
        if (const json* cs = o.get("constraints")) {
            if (!cs->is_array()) fail("boundary.constraints", "expected an array");
            for (std::size_t i = 0; i < cs->size(); ++i) {
                Obj r((*cs)[i], "boundary.constraints." + std::to_string(i));
                ConstraintBlock cb;
                cb.where = parse_selector(r);
                cb.x = r.boolean("x", false);
                cb.y = r.boolean("y", false);
                cb.value = r.number("value", 0.0);
                r.finish();
                if (!cb.x && !cb.y) fail(r.path(), "constrains no component");
                c.boundary.constraints.push_back(cb);
            }
        }
        if (const json* d = o.get("drive")) {
            Obj r(*d, "boundary.drive");
            auto& D = c.boundary.drive;
            D.where = parse_selector(r);
            D.component = component_from_string("boundary.drive.component", r.string("component", "y"));
            D.sign = r.number("sign", 1.0);
            r.finish();
            if (D.sign != 1.0 && D.sign != -1.0) fail("boundary.drive.sign", "must be 1 or -1");
        } else {
            fail("boundary.drive", "required");
        }
        o.finish();
    }

    if (const json* g = top.get("gauge")) {
        Obj o(*g, "gauge");
        GaugeBlock gb;
        const auto l = o.pair("left");
        const auto r = o.pair("right");
        o.finish();
        if (!l || !r) fail("gauge", "both \"left\" and \"right\" are required");
        gb.left = *l;
        gb.right = *r;
        c.gauge = gb;
    }

    if (const json* s = top.get("schedule")) {
        Obj o(*s, "schedule");
        auto& S = c.schedule;
        S.du = o.number("du", S.du);
        S.max_steps = o.integer("max_steps", S.max_steps);
        S.cmod_target = o.opt_number("cmod_target");
        o.finish();
        positive("schedule.du", S.du);
        if (S.max_steps < 0) fail("schedule.max_steps", "must be nonnegative");
        if (S.cmod_target) positive("schedule.cmod_target", *S.cmod_target);
    }

    if (const json* s = top.get("solver")) {
        Obj o(*s, "solver");
        auto& S = c.solver;
        S.tol = o.number("tol", S.tol);
        S.max_iter = o.integer("max_iter", S.max_iter);
        S.history = history_from_string("solver.history", o.string("history", std::string(history_name(S.history))));
        S.max_halvings = o.integer("max_halvings", S.max_halvings);
        o.finish();
        positive("solver.tol", S.tol);
        if (S.max_iter < 1) fail("solver.max_iter", "must be at least 1");
        if (S.max_halvings < 0) fail("solver.max_halvings", "must be nonnegative");
    }

    if (const json* s = top.get("output")) {
        Obj o(*s, "output");
        auto& O = c.output;
        O.directory = o.string("directory", O.directory);
        O.snapshot_interval = o.integer("snapshot_interval", O.snapshot_interval);
        O.vtk_samples = o.integer("vtk_samples", O.vtk_samples);
        o.finish();
        if (O.snapshot_interval < 0) fail("output.snapshot_interval", "must be nonnegative");
        if (O.vtk_samples < 2) fail("output.vtk_samples", "must be at least 2");
    }
    top.finish();

    if (c.schedule.cmod_target && !c.gauge) fail("schedule.cmod_target", "requires a gauge block");
    return c;
}

json to_json(const RunConfig& c)
{
    const auto& p = c.material.params;
    json j;
    j["name"] = c.name;
    j["description"] = c.description;
    j["material"] = {{"E0", p.E0},
                     {"nu", p.nu},
                     {"Gc", p.Gc},
                     {"ft", p.ft},
                     {"l0", p.l0},
                     {"chi", p.chi},
                     {"softening", std::string(to_string(p.softening))},
                     {"order", std::string(to_string(p.order))},
                     {"stress_state", std::string(to_string(p.stress_state))},
                     {"thickness", c.material.thickness}};
    json cut = json::array();
    for (const auto& r : c.geometry.cutouts) cut.push_back({{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}});
    j["geometry"] = {{"x0", c.geometry.x0}, {"y0", c.geometry.y0}, {"lx", c.geometry.lx}, {"ly", c.geometry.ly}, {"cutouts", cut}};
    json bands = json::array();
    for (const auto& b : c.mesh.bands) bands.push_back({{"axis", b.axis == Axis::X ? "x" : "y"}, {"lo", b.lo}, {"hi", b.hi}});
    j["mesh"] = {{"degree", c.mesh.degree},
                 {"coarse_hx", c.mesh.coarse_hx},
                 {"coarse_hy", c.mesh.coarse_hy},
                 {"h", c.mesh.h},
                 {"bands", bands}};
    json cons = json::array();
    for (const auto& cb : c.boundary.constraints) {
        json e = selector_json(cb.where);
        e["x"] = cb.x;
        e["y"] = cb.y;
        e["value"] = cb.value;
        cons.push_back(e);
    }
    json drive = selector_json(c.boundary.drive.where);
    drive["component"] = c.boundary.drive.component == Field::Ux ? "x" : "y";
    drive["sign"] = c.boundary.drive.sign;
    j["boundary"] = {{"constraints", cons}, {"drive", drive}};
    j["gauge"] = c.gauge ? json{{"left", c.gauge->left}, {"right", c.gauge->right}} : json(nullptr);
    j["schedule"] = {{"du", c.schedule.du},
                     {"max_steps", c.schedule.max_steps},
                     {"cmod_target", c.schedule.cmod_target ? json(*c.schedule.cmod_target) : json(nullptr)}};
    j["solver"] = {{"tol", c.solver.tol},
                   {"max_iter", c.solver.max_iter},
                   {"history", std::string(history_name(c.solver.history))},
                   {"max_halvings", c.solver.max_halvings}};
    j["output"] = {{"directory", c.output.directory},
                   {"snapshot_interval", c.output.snapshot_interval},
                   {"vtk_samples", c.output.vtk_samples}};
    return j;
}

}  // namespace

RunConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
    }
    return from_json(j);
}

std::string serialize_config(const RunConfig& config)
{
    return to_json(config).dump(2) + "\n";
}

RunConfig apply_override(const RunConfig& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment + ": override must have the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }

    json root = to_json(config);
    json* node = &root;
    std::string path;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& k = parts[i];
        path = join(path, k);
        const bool last = i + 1 == parts.size();
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(k);
            } catch (const std::exception&) {
                fail(path, "expected an array index");
            }
            if (idx >= node->size()) fail(path, "index out of range");
            node = &(*node)[idx];
        } else if (node->is_object()) {
            if (!node->contains(k)) {
                // Optional blocks serialize as null; allow creating keys beneath them.
                fail(path, "unknown key");
            }
            node = &(*node)[k];
        } else {
            fail(path, "cannot descend into a scalar");
        }
        if (!last && node->is_null()) *node = json::object();
    }
    *node = value;
    return from_json(root);
}

std::vector<std::string> config_warnings(const RunConfig& c)
{
    std::vector<std::string> w;
    const double l0 = c.material.params.l0;
    if (c.mesh.h > 2.0 * l0) {
        std::ostringstream os;
        os << "mesh.h = " << c.mesh.h << " exceeds 2*l0 = " << 2.0 * l0 << "; the crack band is under-resolved";
        w.push_back(os.str());
    }
    if (c.mesh.bands.empty() && std::max(c.mesh.coarse_hx, c.mesh.coarse_hy) > 2.0 * l0) {
        w.push_back("no refinement bands and the coarse spacing exceeds 2*l0");
    }
    return w;
}

// ---------------------------------------------------------------- presets

RunConfig beam_3pb_symmetric()
{
    RunConfig c;
    c.name = "beam_3pb_symmetric";
    c.description =
        "Centre-notched three-point bending beam, 450 x 100 mm, support span 450 mm, notch 50 mm deep and 5 mm wide "
        "at midspan. Left support pinned, right support roller, displacement driven downward at the top centre. "
        "CMOD gauge at the notch mouth. Band of h = l0/2 around the notch line, h = l0 through the height.";
    auto& p = c.material.params;
    p = MaterialParams{};
    p.E0 = 20000.0;
    p.nu = 0.2;
    p.Gc = 0.113;
    p.ft = 2.4;
    p.l0 = 2.5;
    c.material.thickness = 100.0;

    const double L = 450.0, H = 100.0, xc = 225.0;
    const double hw = 2.5;  // notch half width: 4 spans of l0/2
    c.geometry = {0.0, 0.0, L, H, {{xc - hw, xc + hw, 0.0, 50.0}}};
    c.mesh.degree = 3;
    c.mesh.coarse_hx = 25.0;
    c.mesh.coarse_hy = p.l0;
    c.mesh.h = p.l0 / 2.0;
    c.mesh.bands = {{Axis::X, xc - 15.0, xc + 15.0}};

    c.boundary.constraints = {{{std::nullopt, std::nullopt, std::array<double, 2>{0.0, 0.0}}, true, true, 0.0},
                              {{std::nullopt, std::nullopt, std::array<double, 2>{L, 0.0}}, false, true, 0.0}};
    c.boundary.drive = {{std::nullopt, std::nullopt, std::array<double, 2>{xc, H}}, Field::Uy, -1.0};
    c.gauge = GaugeBlock{{xc - hw, 0.0}, {xc + hw, 0.0}};
    c.schedule = {0.01, 100, std::nullopt};
    c.output.snapshot_interval = 10;
    return c;
}

RunConfig l_panel(double l0)
{
    RunConfig c;
    std::ostringstream name;
    name << "l_panel";
    c.name = name.str();
    std::ostringstream d;
    d << "L-shaped panel 500 x 500 mm with the lower-right 250 x 250 mm quadrant removed. Bottom edge of the "
         "vertical leg clamped; upward displacement at the arm's lower face 30 mm from the right edge. "
      << "l0 = " << l0 << " mm, h = l0/2 in the strip left of the re-entrant corner.";
    c.description = d.str();
    auto& p = c.material.params;
    p = MaterialParams{};
    p.E0 = 20000.0;
    p.nu = 0.18;
    p.Gc = 0.13;
    p.ft = 2.5;
    p.l0 = l0;
    c.material.thickness = 100.0;

    c.geometry = {0.0, 0.0, 500.0, 500.0, {{250.0, 500.0, 0.0, 250.0}}};
    c.mesh.degree = 3;
    c.mesh.coarse_hx = 25.0;
    c.mesh.coarse_hy = 25.0;
    c.mesh.h = l0 / 2.0;
    c.mesh.bands = {{Axis::X, 0.0, 260.0}, {Axis::Y, 220.0, 330.0}};

    c.boundary.constraints = {{{Edge::Bottom, std::array<double, 2>{0.0, 250.0}, std::nullopt}, true, true, 0.0}};
    c.boundary.drive = {{std::nullopt, std::nullopt, std::array<double, 2>{470.0, 250.0}}, Field::Uy, 1.0};
    c.schedule = {0.02, 50, std::nullopt};
    c.output.snapshot_interval = 10;
    return c;
}

RunConfig beam_3pb_mixed(double H, double a)
{
    RunConfig c;
    c.name = "beam_3pb_mixed";
    std::ostringstream d;
    d << "Mixed-mode three-point bending beam, H = " << H << " mm, span 2.5H, notch depth H/2 at offset a*H = "
      << a * H << " mm left of midspan (assumed offset convention). Supports at the bottom corners, downward "
      << "displacement at the top centre, stop at CMOD = 0.6 mm.";
    c.description = d.str();
    auto& p = c.material.params;
    p = MaterialParams{};
    p.E0 = 33800.0;
    p.nu = 0.2;
    p.Gc = 0.08;
    p.ft = 3.5;
    p.l0 = 0.001 * H;
    c.material.thickness = 50.0;

    const double L = 2.5 * H;
    const double xc = 0.5 * L;
    const double xn = xc - a * H;
    const double hw = p.l0;  // 4 spans of l0/2
    c.geometry = {0.0, 0.0, L, H, {{xn - hw, xn + hw, 0.0, 0.5 * H}}};
    c.mesh.degree = 3;
    c.mesh.coarse_hx = H / 8.0;
    c.mesh.coarse_hy = H / 8.0;
    c.mesh.h = p.l0 / 2.0;
    c.mesh.bands = {{Axis::X, std::min(xn, xc) - 0.05 * H, std::max(xn, xc) + 0.05 * H}, {Axis::Y, 0.0, H}};

    c.boundary.constraints = {{{std::nullopt, std::nullopt, std::array<double, 2>{0.0, 0.0}}, true, true, 0.0},
                              {{std::nullopt, std::nullopt, std::array<double, 2>{L, 0.0}}, false, true, 0.0}};
    c.boundary.drive = {{std::nullopt, std::nullopt, std::array<double, 2>{xc, H}}, Field::Uy, -1.0};
    c.gauge = GaugeBlock{{xn - hw, 0.0}, {xn + hw, 0.0}};
    c.schedule = {0.001, 100000, 0.6};
    c.output.snapshot_interval = 50;
    return c;
}

RunConfig tension_bar(double l0, ModelOrder order)
{
    RunConfig c;
    c.name = "tension_bar";
    c.description = "Thin 100 x 5 mm strip in uniaxial tension: left edge fixed in x, bottom-left corner fixed in y, "
                    "right edge displaced in x.";
    auto& p = c.material.params;
    p = MaterialParams{};
    p.l0 = l0;
    p.order = order;
    c.material.thickness = 1.0;
    c.geometry = {0.0, 0.0, 100.0, 5.0, {}};
    c.mesh.degree = 3;
    c.mesh.coarse_hx = l0 / 2.0;
    c.mesh.coarse_hy = 5.0;
    c.mesh.h = l0 / 2.0;
    c.boundary.constraints = {{{Edge::Left, std::nullopt, std::nullopt}, true, false, 0.0},
                              {{std::nullopt, std::nullopt, std::array<double, 2>{0.0, 0.0}}, false, true, 0.0}};
    c.boundary.drive = {{Edge::Right, std::nullopt, std::nullopt}, Field::Ux, 1.0};
    c.schedule = {2e-4, 120, std::nullopt};
    return c;
}

std::vector<PresetInfo> list_presets()
{
    std::vector<PresetInfo> out;
    out.push_back({"beam_3pb_symmetric", beam_3pb_symmetric().description});
    out.push_back({"l_panel", l_panel().description});
    for (const char* v : {"2.5", "5.0", "7.5", "10.0"}) {
        out.push_back({std::string("l_panel_l0_") + v, std::string("L-shaped panel with l0 = ") + v + " mm"});
    }
    out.push_back({"beam_3pb_mixed", beam_3pb_mixed().description});
    for (const char* H : {"80", "160", "320"}) {
        for (const char* a : {"0", "0.3125", "0.625"}) {
            out.push_back({std::string("beam_3pb_mixed_H") + H + "_a" + a,
                           std::string("Mixed-mode beam with H = ") + H + " mm and a = " + a});
        }
    }
    out.push_back({"tension_bar", tension_bar().description});
    return out;
}

RunConfig preset_config(const std::string& name)
{
    if (name == "beam_3pb_symmetric") return beam_3pb_symmetric();
    if (name == "l_panel") return l_panel();
    if (name == "beam_3pb_mixed") return beam_3pb_mixed();
    if (name == "tension_bar") return tension_bar();
    const std::string lp = "l_panel_l0_";
    if (name.rfind(lp, 0) == 0) {
        const auto v = name.substr(lp.size());
        for (const char* ok : {"2.5", "5.0", "7.5", "10.0"}) {
            if (v == ok) {
                auto c = l_panel(std::stod(v));
                c.name = name;
                return c;
            }
        }
    }
    const std::string mb = "beam_3pb_mixed_H";
    if (name.rfind(mb, 0) == 0) {
        const auto rest = name.substr(mb.size());
        const auto us = rest.find("_a");
        if (us != std::string::npos) {
            const auto H = rest.substr(0, us), a = rest.substr(us + 2);
            const bool okH = H == "80" || H == "160" || H == "320";
            const bool oka = a == "0" || a == "0.3125" || a == "0.625";
            if (okH && oka) {
                auto c = beam_3pb_mixed(std::stod(H), std::stod(a));
                c.name = name;
                return c;
            }
        }
    }
    throw ConfigError("preset: unknown preset \"" + name + "\"");
}

// ---------------------------------------------------------------- building

namespace {

std::vector<int> select_cps(const Mesh& mesh, const Selector& s, const std::string& path)
{
    if (s.edge) {
        const auto& kv = (*s.edge == Edge::Left || *s.edge == Edge::Right) ? mesh.patch().kv_eta() : mesh.patch().kv_xi();
        const double lo = s.range ? (*s.range)[0] : kv.front();
        const double hi = s.range ? (*s.range)[1] : kv.back();
        auto cps = edge_control_points(mesh, *s.edge, lo, hi);
        if (cps.empty()) fail(path, "selects no control points");
        return cps;
    }
    const Eigen::Vector2d pt((*s.point)[0], (*s.point)[1]);
    try {
        const auto loc = locate_point_dof(mesh, pt);
        return {loc.nearest_cp};
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

}  // namespace

BuiltProblem build_problem(const RunConfig& c)
{
    MeshSpec spec;
    spec.degree = c.mesh.degree;
    spec.x0 = c.geometry.x0;
    spec.y0 = c.geometry.y0;
    spec.lx = c.geometry.lx;
    spec.ly = c.geometry.ly;
    spec.coarse_hx = c.mesh.coarse_hx;
    spec.coarse_hy = c.mesh.coarse_hy;
    for (const auto& b : c.mesh.bands) spec.bands.push_back({b.axis, b.lo, b.hi, c.mesh.h});
    const double xa = spec.x0, xb = spec.x0 + spec.lx, ya = spec.y0, yb = spec.y0 + spec.ly;
    for (const auto& r : c.geometry.cutouts) {
        for (double v : {r.x0, r.x1}) {
            if (v > xa && v < xb) spec.lines_x.push_back(v);
        }
        for (double v : {r.y0, r.y1}) {
            if (v > ya && v < yb) spec.lines_y.push_back(v);
        }
    }

    Mesh mesh = [&] {
        try {
            return build_mesh(spec);
        } catch (const std::exception& e) {
            fail("mesh", e.what());
        }
    }();
    for (std::size_t i = 0; i < c.geometry.cutouts.size(); ++i) {
        const auto& r = c.geometry.cutouts[i];
        try {
            apply_notch(mesh, {r.x0, r.x1, r.y0, r.y1});
        } catch (const std::exception& e) {
            fail("geometry.cutouts." + std::to_string(i), e.what());
        }
    }

    BoundaryConditions bcs;
    std::set<int> used;
    auto add = [&](int cp, Field f, double value, bool driven, const std::string& path) {
        const int node = mesh.node_of_cp(cp);
        if (node < 0) fail(path, "selected control point is not part of the analysis domain");
        const int dof = mesh.dof(node, f);
        if (!used.insert(dof).second) {
            if (driven) fail(path, "driven dof is already constrained");
            return;  // duplicate support constraint on a shared corner
        }
        bcs.dirichlet.push_back({dof, value, driven});
    };
    // Drive first so that an overlapping support is reported.
    {
        const std::string path = "boundary.drive";
        for (int cp : select_cps(mesh, c.boundary.drive.where, path)) add(cp, c.boundary.drive.component, 0.0, true, path);
    }
    for (std::size_t i = 0; i < c.boundary.constraints.size(); ++i) {
        const auto& cb = c.boundary.constraints[i];
        const std::string path = "boundary.constraints." + std::to_string(i);
        for (int cp : select_cps(mesh, cb.where, path)) {
            const int node = mesh.node_of_cp(cp);
            if (node >= 0) {
                for (Field f : {Field::Ux, Field::Uy}) {
                    const bool want = f == Field::Ux ? cb.x : cb.y;
                    if (want && used.count(mesh.dof(node, f))) {
                        const bool clash = std::any_of(bcs.dirichlet.begin(), bcs.dirichlet.end(), [&](const DirichletDof& d) {
                            return d.dof == mesh.dof(node, f) && d.driven;
                        });
                        if (clash) fail(path, "constrains a driven dof");
                    }
                }
            }
            if (cb.x) add(cp, Field::Ux, cb.value, false, path);
            if (cb.y) add(cp, Field::Uy, cb.value, false, path);
        }
    }
    bcs.drive_sign = c.boundary.drive.sign;
    try {
        bcs.validate(mesh);
    } catch (const std::exception& e) {
        fail("boundary", e.what());
    }

    std::optional<CmodGauge> gauge;
    if (c.gauge) {
        gauge = CmodGauge{{c.gauge->left[0], c.gauge->left[1]}, {c.gauge->right[0], c.gauge->right[1]}};
    }
    return BuiltProblem{std::move(mesh), std::move(bcs), gauge, MaterialModel(c.material.params)};
}

Problem make_problem(const RunConfig& c, const BuiltProblem& built, int threads)
{
    Problem p;
    p.mesh = &built.mesh;
    p.material = built.material;
    p.bcs = built.bcs;
    p.schedule = {c.schedule.du, c.schedule.max_steps, c.schedule.cmod_target};
    p.settings = c.solver;
    p.thickness = c.material.thickness;
    p.gauge = built.gauge;
    p.threads = threads;
    return p;
}

}  // namespace pf4
