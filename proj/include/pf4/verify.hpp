#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pf4/assembly.hpp"
#include "pf4/discretization.hpp"
#include "pf4/material.hpp"

namespace pf4 {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Unit square-ish cubic mesh with nx x ny elements on [0, lx] x [0, ly].
Mesh uniform_mesh(int degree, int nx, int ny, double lx, double ly);

/// Max relative deviation of g from (1-phi)^2 on a 1e-3 grid with brittle coefficients.
CheckResult check_degradation_reduction();
CheckResult check_c_alpha();

struct GammaBaseline {
    double gamma_chi2 = 0.0;      // fourth order, chi = 2
    double gamma_chi0 = 0.0;      // fourth order, chi = 0
    double change_chi2 = 0.0;     // relative change under 2x refinement
    double change_chi0 = 0.0;
    double second_chi2 = 0.0;     // second order, closed form
    double second_chi0 = 0.0;
};
GammaBaseline measure_gamma();
CheckResult check_gamma_1d();

/// Zero load, zero fields, cohesive mode: residual must vanish.
CheckResult check_rest_equilibrium();

struct TangentErrors {
    double uu = 0.0, uphi = 0.0, phiu = 0.0, phiphi = 0.0;
};
/// Central-difference check of the four tangent blocks at one random
/// admissible state. Errors are max-abs differences relative to the largest
/// entry of the assembled block (of the whole matrix for blocks that vanish).
TangentErrors tangent_fd_errors(const Mesh& mesh, const MaterialModel& mat, HistoryMode mode, std::uint64_t seed);
CheckResult check_tangent_fd(int states = 5);

/// Single cubic element in uniaxial tension against the analytic field.
CheckResult check_patch_test();
CheckResult check_energy_split(int samples = 10000);

/// Partition of unity, derivative FD and knot insertion invariance.
CheckResult check_splines();

/// All fast checks (used by `pf4 verify`).
std::vector<CheckResult> verify_suite();

}  // namespace pf4
