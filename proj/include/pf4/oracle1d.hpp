#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pf4/material.hpp"

namespace pf4 {

/// Raised when the 1D profile minimization fails; carries the iteration trace.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Symmetric 1D crack profile sampled on a grid with derivatives.
struct Profile1D {
    std::vector<double> x;  // mm, symmetric about 0
    std::vector<double> phi;
    std::vector<double> dphi;
    std::vector<double> d2phi;
    double l0 = 1.0;
    double chi = 2.0;
    ModelOrder order = ModelOrder::Second;
    double gamma = 0.0;  // regularized crack length
};

struct GammaResult {
    double value = 0.0;
    bool under_resolved = false;  // fewer than 40 grid points per l0
};

/// Crack surface density psi_phi,n at one point.
double crack_density(double phi, double dphi, double d2phi, double l0, double chi, ModelOrder order);

/// Composite quadrature of the crack density over the profile grid.
GammaResult gamma_integral(const Profile1D& profile);

/// Closed-form optimal profile of the second-order density for chi in {0, 2}.
Profile1D profile_second_order(double l0, double chi = 2.0, int points_per_l0 = 200);

struct FourthOrderOptions {
    int spans_per_l0 = 20;
    double half_length_factor = 4.0 * 3.14159265358979323846;  // L = factor * l0
    int samples_per_l0 = 100;
};

/// Minimizes the fourth-order density on [0, L] with a cubic spline subject to
/// phi(0) = 1, phi'(0) = 0 and 0 <= phi <= 1. The support is searched over
/// prefixes of free coefficients, each solved by Newton on the Euler-Lagrange
/// system. Natural conditions hold at x = L. The result is mirrored to
/// [-L, L]; `gamma` is integrated exactly on the spline.
Profile1D profile_fourth_order(double l0, double chi, const FourthOrderOptions& options = {});

}  // namespace pf4
