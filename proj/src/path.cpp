#include "decnash/path.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "decnash/errors.hpp"

namespace decnash {

namespace {

constexpr double kDomainSlack = 1e-9;
constexpr double kMinTangentNorm = 1e-9;

// Horner evaluation of value, first and second derivative at sigma.
void horner2(const std::vector<double>& c, double sigma, double& p, double& dp, double& ddp) {
  p = 0.0;
  dp = 0.0;
  ddp = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) {
    ddp = ddp * sigma + 2.0 * dp;
    dp = dp * sigma + p;
    p = p * sigma + *it;
  }
}

void check_domain(const PathPolynomial& path, double& s) {
  if (s < -kDomainSlack || s > path.s_max + kDomainSlack) {
    throw std::domain_error("arc progress s=" + std::to_string(s) + " outside [0, " +
                            std::to_string(path.s_max) + "]");
  }
  s = std::clamp(s, 0.0, path.s_max);
}

PathPoint eval_raw(const PathPolynomial& path, double s) {
  const double sigma = s / path.s_scale;
  PathPoint pt{};
  double d2x, d2y;
  horner2(path.coeffs_x, sigma, pt.x, pt.dx, d2x);
  horner2(path.coeffs_y, sigma, pt.y, pt.dy, d2y);
  pt.dx /= path.s_scale;
  pt.dy /= path.s_scale;
  pt.ddx = d2x / (path.s_scale * path.s_scale);
  pt.ddy = d2y / (path.s_scale * path.s_scale);
  return pt;
}

}  // namespace

void validate(const PathPolynomial& path) {
  if (path.coeffs_x.empty() || path.coeffs_x.size() != path.coeffs_y.size()) {
    throw std::invalid_argument("path coefficient sequences must have identical length >= 1");
  }
  if (!(path.s_scale > 0.0) || !(path.s_max > 0.0)) {
    throw std::invalid_argument("path requires s_scale > 0 and s_max > 0");
  }
}

Eigen::Vector2d eval_position(const PathPolynomial& path, double s) {
  check_domain(path, s);
  const PathPoint pt = eval_raw(path, s);
  return {pt.x, pt.y};
}

Eigen::Vector2d eval_tangent(const PathPolynomial& path, double s, double v) {
  check_domain(path, s);
  const PathPoint pt = eval_raw(path, s);
  return {v * pt.dx, v * pt.dy};
}

double heading(const PathPolynomial& path, double s) {
  check_domain(path, s);
  const PathPoint pt = eval_raw(path, s);
  const double norm = std::hypot(pt.dx, pt.dy);
  if (norm < kMinTangentNorm) {
    throw DegenerateGeometryError("degenerate path tangent at s=" + std::to_string(s));
  }
  return std::atan2(pt.dy, pt.dx);
}

PathPoint eval_extended(const PathPolynomial& path, double s) {
  if (s >= 0.0 && s <= path.s_max) {
    return eval_raw(path, s);
  }
  const double anchor = (s < 0.0) ? 0.0 : path.s_max;
  PathPoint pt = eval_raw(path, anchor);
  const double overhang = s - anchor;
  pt.x += overhang * pt.dx;
  pt.y += overhang * pt.dy;
  pt.ddx = 0.0;
  pt.ddy = 0.0;
  return pt;
}

PathPolynomial fit_path(const std::vector<Eigen::Vector2d>& waypoints, int degree,
                        FitDiagnostics* diagnostics) {
  if (degree < 0) {
    throw std::invalid_argument("fit degree must be >= 0");
  }
  const int n_coeffs = degree + 1;
  const int n_points = static_cast<int>(waypoints.size());
  if (n_points < n_coeffs) {
    throw FitError("underdetermined fit: " + std::to_string(n_points) + " waypoints for degree " +
                       std::to_string(degree),
                   0.0);
  }

  // Cumulative chord length; chord distance approximates arc length.
  Eigen::VectorXd chord(n_points);
  chord[0] = 0.0;
  for (int k = 1; k < n_points; ++k) {
    const double ds = (waypoints[k] - waypoints[k - 1]).norm();
    if (ds < 1e-12) {
      throw std::invalid_argument("consecutive waypoints coincide at index " + std::to_string(k));
    }
    chord[k] = chord[k - 1] + ds;
  }
  const double total = chord[n_points - 1];

  Eigen::MatrixXd design(n_points, n_coeffs);
  for (int k = 0; k < n_points; ++k) {
    const double sigma = chord[k] / total;
    double power = 1.0;
    for (int j = 0; j < n_coeffs; ++j) {
      design(k, j) = power;
      power *= sigma;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const auto& r_diag = qr.matrixR().diagonal();
  const double r_max = std::abs(r_diag[0]);
  const double r_min = std::abs(r_diag[n_coeffs - 1]);
  const double condition = (r_min > 0.0) ? r_max / r_min : std::numeric_limits<double>::infinity();
  // High-degree fits on [0,1] are legitimately ill-conditioned (degree 20 sits
  // near 1e15) yet solve fine with pivoted QR; only flag genuine collapse.
  if (!(r_min > r_max * 1e-16)) {
    throw FitError("rank-deficient design matrix (condition ~ " + std::to_string(condition) + ")",
                   condition);
  }

  Eigen::MatrixXd targets(n_points, 2);
  for (int k = 0; k < n_points; ++k) {
    targets.row(k) = waypoints[k].transpose();
  }
  const Eigen::MatrixXd coeffs = qr.solve(targets);
  if (!coeffs.allFinite()) {
    throw FitError("least-squares solve produced non-finite coefficients (condition ~ " +
                       std::to_string(condition) + ")",
                   condition);
  }

  PathPolynomial path;
  path.coeffs_x.assign(coeffs.col(0).data(), coeffs.col(0).data() + n_coeffs);
  path.coeffs_y.assign(coeffs.col(1).data(), coeffs.col(1).data() + n_coeffs);
  path.s_scale = total;
  path.s_max = total;

  if (diagnostics != nullptr) {
    double sum_sq = 0.0;
    double max_res = 0.0;
    for (int k = 0; k < n_points; ++k) {
      const Eigen::Vector2d fitted = eval_position(path, chord[k]);
      const double res = (fitted - waypoints[k]).norm();
      sum_sq += res * res;
      max_res = std::max(max_res, res);
    }
    diagnostics->rms_residual = std::sqrt(sum_sq / n_points);
    diagnostics->max_residual = max_res;
    diagnostics->condition = condition;
  }
  return path;
}

}  // namespace decnash
