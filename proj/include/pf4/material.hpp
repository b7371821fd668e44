#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace pf4 {

enum class Softening { Linear, Exponential, Hyperbolic, Cornelissen, Brittle };
enum class ModelOrder { Second, Fourth };
enum class StressState { PlaneStress, PlaneStrain };

std::string_view to_string(Softening s);
std::string_view to_string(ModelOrder o);
std::string_view to_string(StressState s);
Softening softening_from_string(std::string_view s);
ModelOrder order_from_string(std::string_view s);
StressState stress_state_from_string(std::string_view s);

/// Exponents and polynomial coefficients of the rational degradation function
/// for one cohesive softening law.
struct SofteningCoeffs {
    double n;
    double a2;
    double a3;
};

/// Tabulated optimal (n, a2, a3). Brittle has no cohesive law and throws.
SofteningCoeffs softening_coeffs(Softening law);

/// User-facing material inputs in the N-mm-MPa system.
struct MaterialParams {
    double E0 = 20000.0;  // MPa
    double nu = 0.2;
    double Gc = 0.113;  // N/mm
    double ft = 2.4;    // MPa
    double l0 = 2.5;    // mm
    double chi = 2.0;
    Softening softening = Softening::Cornelissen;
    ModelOrder order = ModelOrder::Fourth;
    StressState stress_state = StressState::PlaneStress;

    bool operator==(const MaterialParams&) const = default;
};

/// Material with all derived constants resolved.
struct MaterialModel {
    MaterialModel() : MaterialModel(MaterialParams{}) {}
    explicit MaterialModel(const MaterialParams& params);

    MaterialParams params;
    double lambda;  // effective first Lame constant (plane-stress substituted if needed)
    double mu;
    double l_ch;  // Irwin length E0 Gc / ft^2
    double a1;
    double n;
    double a2;
    double a3;
    double chi;  // forced to 0 in brittle mode
    double c_alpha;
    double H0;  // ft^2 / (2 E0)
    bool history_floor;  // false in brittle mode
    /// Quadratic penalty (MPa) on phi below 0 or above 1, sized so bound
    /// violations stay near 5e-3.
    double bound_penalty;

    bool brittle() const { return params.softening == Softening::Brittle; }
    /// Isotropic elasticity in Voigt form (xx, yy, xy) with engineering shear.
    Eigen::Matrix3d elasticity_matrix() const;
};

/// Eigen-decomposition based tension/compression split of a 2x2 strain.
struct StrainSplit {
    Eigen::Matrix2d plus;
    Eigen::Matrix2d minus;
    Eigen::Vector2d eigenvalues;  // descending
    Eigen::Matrix2d eigenvectors;  // columns match eigenvalues
};

StrainSplit split_strain(const Eigen::Matrix2d& eps);

struct EnergySplit {
    double plus;
    double minus;
};

EnergySplit energy_split(const Eigen::Matrix2d& eps, const MaterialModel& mat);
/// Unsplit energy lambda/2 tr^2 + mu tr(eps^2).
double elastic_energy(const Eigen::Matrix2d& eps, const MaterialModel& mat);

struct StressResult {
    Eigen::Matrix2d sigma;
    Eigen::Matrix2d plus;
    Eigen::Matrix2d minus;
};

StressResult stress(const Eigen::Matrix2d& eps, double phi, const MaterialModel& mat);

struct GeometricFn {
    double alpha;
    double d1;
    double d2;
    double c_alpha;
};

/// c_alpha = 4 int_0^1 sqrt(alpha(b)) db; closed form for chi in {0, 2}.
double c_alpha_for(double chi);
GeometricFn geometric_fn(double phi, double chi);

struct Degradation {
    double g;
    double d1;
    double d2;
};

/// Exact on [0, 1], continued by its second-order Taylor polynomial outside.
Degradation degradation_fn(double phi, const MaterialModel& mat);
/// Rational degradation for explicit coefficients.
Degradation degradation_fn(double phi, double n, double a1, double a2, double a3);

/// Rankine crack driving force <sigma_1(sigma+)>^2 / (2 E0).
double driving_force(const Eigen::Matrix2d& eps, const MaterialModel& mat);
/// Voigt gradient of driving_force with respect to (eps_xx, eps_yy, gamma_xy).
Eigen::Vector3d driving_force_gradient(const Eigen::Matrix2d& eps, const MaterialModel& mat);

struct QuadPointState {
    double H = 0.0;
    Eigen::Matrix2d eps = Eigen::Matrix2d::Zero();
};

/// History floor: H0 for cohesive laws, 0 in brittle mode.
double history_floor(const MaterialModel& mat);
QuadPointState fresh_state(const MaterialModel& mat);
QuadPointState update_history(const QuadPointState& state, double H_trial, const MaterialModel& mat);

/// Derivatives of sigma+ and sigma- with respect to Voigt strain.
struct SplitTangent {
    Eigen::Matrix3d plus;
    Eigen::Matrix3d minus;
};

SplitTangent split_tangent(const Eigen::Matrix2d& eps, const MaterialModel& mat);
/// dsigma/deps at fixed phi, Voigt (xx, yy, xy) x (xx, yy, gamma).
Eigen::Matrix3d material_tangent(const Eigen::Matrix2d& eps, double phi, const MaterialModel& mat);

inline Eigen::Vector3d to_voigt_stress(const Eigen::Matrix2d& s) { return {s(0, 0), s(1, 1), s(0, 1)}; }
inline Eigen::Matrix2d strain_from_voigt(const Eigen::Vector3d& v)
{
    Eigen::Matrix2d e;
    e << v[0], 0.5 * v[2], 0.5 * v[2], v[1];
    return e;
}

}  // namespace pf4
