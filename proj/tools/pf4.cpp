#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pf4/config.hpp"
#include "pf4/oracle1d.hpp"
#include "pf4/output.hpp"
#include "pf4/solver.hpp"
#include "pf4/verify.hpp"

namespace fs = std::filesystem;
using namespace pf4;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kSolverFailure = 2;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string snapshot_name(int step)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%05d.vtk", step);
    return buf;
}

int cmd_run(const std::string& config_path, const std::string& preset, const std::string& out_dir,
            const std::vector<std::string>& overrides)
{
    if (config_path.empty() == preset.empty()) {
        std::cerr << "run: give exactly one of --config PATH or --preset NAME\n";
        return kUserError;
    }
    RunConfig cfg = preset.empty() ? parse_config(read_file(config_path)) : preset_config(preset);
    for (const auto& o : overrides) cfg = apply_override(cfg, o);
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    for (const auto& w : config_warnings(cfg)) std::cerr << "warning: " << w << "\n";

    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "config.json", std::ios::binary);
        f << serialize_config(cfg);
    }

    const auto built = build_problem(cfg);
    const Problem problem = make_problem(cfg, built);
    std::cout << "mesh: " << built.mesh.elements().size() << " elements, " << built.mesh.num_dofs() << " dofs; "
              << "solver backend " << LinearSolver::backend() << "\n";

    CurveWriter csv((dir / "curve.csv").string());
    Observer obs;
    obs.snapshot_interval = cfg.output.snapshot_interval;
    obs.on_row = [&](const CurveRow& r) {
        csv.append(r);
        std::printf("step %5d  u = %.6e mm  F = %.6e N  iters %2d  %s\n", r.step, r.applied, r.reaction, r.iterations,
                    std::string(to_string(r.status)).c_str());
        std::fflush(stdout);
    };
    obs.on_snapshot = [&](const SimState& s) {
        write_vtk(s, built.mesh, (dir / snapshot_name(s.step_index)).string(), cfg.output.vtk_samples);
    };

    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run_simulation(problem, obs);
    write_vtk(res.final_state, built.mesh, (dir / "final.vtk").string(), cfg.output.vtk_samples);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "finished " << res.curve.size() << " rows in " << secs << " s"
              << (res.failed ? " (stopped on a failed step)" : "") << "\n";
    return res.failed ? kSolverFailure : kOk;
}

int cmd_verify()
{
    bool all = true;
    for (const auto& c : verify_suite()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        all = all && c.passed;
    }
    return all ? kOk : kUserError;
}

int cmd_oracle1d(double l0, double chi, const std::string& order, const std::string& out)
{
    const ModelOrder o = order_from_string(order);
    const Profile1D p = o == ModelOrder::Second ? profile_second_order(l0, chi) : profile_fourth_order(l0, chi);
    const auto g = gamma_integral(p);
    std::printf("gamma %.12f (grid quadrature %.12f%s)\n", p.gamma, g.value, g.under_resolved ? ", under-resolved" : "");
    if (!out.empty()) write_profile_csv(p, out);
    return kOk;
}

int cmd_presets(const std::string& emit)
{
    if (!emit.empty()) {
        std::cout << serialize_config(preset_config(emit));
        return kOk;
    }
    for (const auto& p : list_presets()) std::cout << p.name << "\n    " << p.description << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fourth-order phase-field cohesive fracture solver on spline discretizations"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a simulation from a config file or preset");
    std::string config_path, preset, out_dir, positional;
    std::vector<std::string> overrides;
    run->add_option("--config", config_path, "JSON run configuration");
    run->add_option("config_file", positional, "JSON run configuration (same as --config)");
    run->add_option("--preset", preset, "Built-in preset name");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--override", overrides, "Dot-path assignment key=value (repeatable)");

    auto* verify = app.add_subcommand("verify", "Run the invariant suite");

    auto* oracle = app.add_subcommand("oracle1d", "Optimal 1D crack profile and Gamma");
    double l0 = 1.0, chi = 2.0;
    std::string order = "fourth", profile_out;
    oracle->add_option("--l0", l0, "Length scale (mm)");
    oracle->add_option("--chi", chi, "Geometric function parameter");
    oracle->add_option("--order", order, "second or fourth");
    oracle->add_option("--out", profile_out, "CSV output path");

    auto* presets = app.add_subcommand("presets", "List built-in benchmarks");
    std::string emit;
    presets->add_option("--emit", emit, "Print the named preset as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUserError;
    }

    try {
        if (*run) {
            if (!positional.empty()) {
                if (!config_path.empty()) {
                    std::cerr << "run: config given twice\n";
                    return kUserError;
                }
                config_path = positional;
            }
            return cmd_run(config_path, preset, out_dir, overrides);
        }
        if (*verify) return cmd_verify();
        if (*oracle) return cmd_oracle1d(l0, chi, order, profile_out);
        if (*presets) return cmd_presets(emit);
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const OracleError& e) {
        std::cerr << "oracle failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    }
    return kUserError;
}
