#pragma once

#include <Eigen/Core>
#include <vector>

namespace decnash {

/// Fixed planar path parametrized by arc progress s in meters. Positions come
/// from a pair of polynomials evaluated at the normalized parameter s / s_scale;
/// normalizing keeps high-degree fits well conditioned.
struct PathPolynomial {
  std::vector<double> coeffs_x;  ///< ascending powers
  std::vector<double> coeffs_y;  ///< ascending powers, same length as coeffs_x
  double s_scale = 1.0;          ///< normalization factor, meters
  double s_max = 0.0;            ///< end of the path in raw arc progress, meters
};

/// Throws std::invalid_argument if the invariants do not hold
/// (equal coefficient lengths >= 1, positive s_scale and s_max).
void validate(const PathPolynomial& path);

/// Position at arc progress s. Requires 0 <= s <= s_max (throws
/// std::domain_error otherwise, with a tiny tolerance for roundoff).
Eigen::Vector2d eval_position(const PathPolynomial& path, double s);

/// Velocity vector at arc progress s when travelling at speed v, i.e. the
/// chain-rule derivative v * dp/ds including the 1/s_scale factor.
Eigen::Vector2d eval_tangent(const PathPolynomial& path, double s, double v);

/// Direction of travel at arc progress s, as atan2 of the unit tangent.
/// Throws DegenerateGeometryError when the tangent magnitude is below 1e-9.
double heading(const PathPolynomial& path, double s);

/// Position and derivatives with respect to raw arc progress, with the domain
/// extended linearly beyond [0, s_max]. Planner internals evaluate candidate
/// trajectories that may momentarily run past the fitted range; the extension
/// keeps those evaluations defined and C1-continuous.
struct PathPoint {
  double x, y;      ///< position
  double dx, dy;    ///< d/ds
  double ddx, ddy;  ///< d^2/ds^2 (zero on the linear extension)
};
PathPoint eval_extended(const PathPolynomial& path, double s);

struct FitDiagnostics {
  double rms_residual = 0.0;  ///< RMS of planar waypoint residuals, meters
  double max_residual = 0.0;
  double condition = 0.0;     ///< condition estimate of the design matrix
};

/// Least-squares polynomial fit through waypoints, parametrized by cumulative
/// chord length and normalized so the fit parameter spans [0, 1]. Solved with
/// a QR factorization; degree-20 fits on raw meter distances would be hopeless.
/// Throws FitError when underdetermined or rank-deficient,
/// std::invalid_argument when consecutive waypoints coincide.
PathPolynomial fit_path(const std::vector<Eigen::Vector2d>& waypoints, int degree,
                        FitDiagnostics* diagnostics = nullptr);

}  // namespace decnash
