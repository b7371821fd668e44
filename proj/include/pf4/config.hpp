#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pf4/discretization.hpp"
#include "pf4/material.hpp"
#include "pf4/solver.hpp"

namespace pf4 {

/// Schema or physical-invariant violation; the message starts with the
/// dot path of the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MaterialBlock {
    MaterialParams params;
    double thickness = 1.0;  // mm
    bool operator==(const MaterialBlock&) const = default;
};

struct GeometryBlock {
    double x0 = 0.0;
    double y0 = 0.0;
    double lx = 1.0;
    double ly = 1.0;
    std::vector<RemovedRegion> cutouts;  // notches and removed quadrants
    bool operator==(const GeometryBlock&) const = default;
};

struct BandBlock {
    Axis axis = Axis::X;
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const BandBlock&) const = default;
};

struct MeshBlock {
    int degree = 3;
    double coarse_hx = 1.0;
    double coarse_hy = 1.0;
    double h = 1.0;  // effective element size inside the bands
    std::vector<BandBlock> bands;
    bool operator==(const MeshBlock&) const = default;
};

/// A constraint selects control points either on a patch edge (optionally
/// restricted to a range along it) or nearest to a boundary point.
struct Selector {
    std::optional<Edge> edge;
    std::optional<std::array<double, 2>> range;
    std::optional<std::array<double, 2>> point;
    bool operator==(const Selector&) const = default;
};

struct ConstraintBlock {
    Selector where;
    bool x = false;
    bool y = false;
    double value = 0.0;
    bool operator==(const ConstraintBlock&) const = default;
};

struct DriveBlock {
    Selector where;
    Field component = Field::Uy;
    double sign = 1.0;
    bool operator==(const DriveBlock&) const = default;
};

struct BoundaryBlock {
    std::vector<ConstraintBlock> constraints;
    DriveBlock drive;
    bool operator==(const BoundaryBlock&) const = default;
};

struct GaugeBlock {
    std::array<double, 2> left{};
    std::array<double, 2> right{};
    bool operator==(const GaugeBlock&) const = default;
};

struct ScheduleBlock {
    double du = 0.01;
    int max_steps = 100;
    std::optional<double> cmod_target;
    bool operator==(const ScheduleBlock&) const = default;
};

struct OutputBlock {
    std::string directory = "out";
    int snapshot_interval = 0;  // 0: initial and final snapshots only
    int vtk_samples = 2;        // per element and direction
    bool operator==(const OutputBlock&) const = default;
};

struct RunConfig {
    std::string name = "custom";
    std::string description;
    MaterialBlock material;
    GeometryBlock geometry;
    MeshBlock mesh;
    BoundaryBlock boundary;
    std::optional<GaugeBlock> gauge;
    ScheduleBlock schedule;
    SolverSettings solver;
    OutputBlock output;
    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a JSON document. Missing keys take defaults; unknown
/// keys are rejected.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& config);

/// Applies `key=value` with a dot path (array elements by index) to the JSON
/// form of `config` and re-parses. Values are read as JSON, falling back to a
/// plain string.
RunConfig apply_override(const RunConfig& config, const std::string& assignment);

/// Non-fatal advisories (e.g. coarse mesh relative to l0).
std::vector<std::string> config_warnings(const RunConfig& config);

struct PresetInfo {
    std::string name;
    std::string description;
};

std::vector<PresetInfo> list_presets();
/// Throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

/// Symmetric three-point bending beam.
RunConfig beam_3pb_symmetric();
/// L-shaped panel with the given length scale.
RunConfig l_panel(double l0 = 7.5);
/// Mixed-mode beam of height H with notch offset a*H from midspan.
RunConfig beam_3pb_mixed(double H = 80.0, double a = 0.0);
/// Thin strip in uniaxial tension under displacement control.
RunConfig tension_bar(double l0 = 2.5, ModelOrder order = ModelOrder::Fourth);

/// Mesh, boundary conditions and solver problem resolved from a config.
struct BuiltProblem {
    Mesh mesh;
    BoundaryConditions bcs;
    std::optional<CmodGauge> gauge;
    MaterialModel material;
};

BuiltProblem build_problem(const RunConfig& config);

/// Problem view for run_simulation; `built` must outlive the result.
Problem make_problem(const RunConfig& config, const BuiltProblem& built, int threads = 0);

}  // namespace pf4
