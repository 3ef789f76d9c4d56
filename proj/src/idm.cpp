#include "decnash/idm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace decnash {

void validate(const IdmParams& params) {
  if (!(params.d_min > 0.0)) throw std::invalid_argument("d_min must be positive");
  if (!(params.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(params.a_max > 0.0)) throw std::invalid_argument("a_max must be positive");
  if (!(params.b_pref > 0.0)) throw std::invalid_argument("b_pref must be positive");
  if (!(params.v_target > 0.0)) throw std::invalid_argument("v_target must be positive");
  if (!(params.b_emergency > 0.0)) throw std::invalid_argument("b_emergency must be positive");
  if (!(params.follow_half_angle > 0.0) || params.follow_half_angle > std::numbers::pi) {
    throw std::invalid_argument("follow half-angle must lie in (0, pi]");
  }
}

std::optional<int> select_follow(const VehicleState& ego, const PathPolynomial& ego_path,
                                 const std::vector<VehicleState>& others,
                                 const IdmParams& params) {
  validate(params);
  const double h = heading(ego_path, ego.s);
  const double cos_h = std::cos(h);
  const double sin_h = std::sin(h);
  const double cos_limit = std::cos(params.follow_half_angle);

  std::optional<int> best_id;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& other : others) {
    if (other.id == ego.id) continue;
    const double dx = other.p_x - ego.p_x;
    const double dy = other.p_y - ego.p_y;
    const double dist = std::hypot(dx, dy);
    if (dist > 0.0 && dx * cos_h + dy * sin_h < dist * cos_limit) continue;
    if (dist < best || (dist == best && best_id && other.id < *best_id)) {
      best = dist;
      best_id = other.id;
    }
  }
  return best_id;
}

double idm_accel(double v, const IdmParams& params) {
  const double a = params.a_max * (1.0 - std::pow(v / params.v_target, 4));
  return std::clamp(a, -params.b_emergency, params.a_max);
}

double idm_accel(double v, double d, double r, const IdmParams& params) {
  if (d <= 0.0) return -params.b_emergency;
  // Desired gap grows with speed and with the closing rate: approaching a
  // slower vehicle demands extra distance proportional to the kinetic energy
  // that the braking phase has to dissipate.
  const double d_des =
      params.d_min + params.tau * v + v * r / (2.0 * std::sqrt(params.a_max * params.b_pref));
  const double ratio = d_des / d;
  const double a = params.a_max * (1.0 - std::pow(v / params.v_target, 4) - ratio * ratio);
  return std::clamp(a, -params.b_emergency, params.a_max);
}

std::optional<PathCast> cast_to_path(const VehicleState& ego, const PathPolynomial& ego_path,
                                     double follow_x, double follow_y, double follow_vx,
                                     double follow_vy, double search_window) {
  if (!(search_window > 0.0)) throw std::invalid_argument("search window must be positive");

  const auto dist2 = [&](double s) {
    const PathPoint p = eval_extended(ego_path, s);
    const double dx = p.x - follow_x;
    const double dy = p.y - follow_y;
    return dx * dx + dy * dy;
  };

  // Coarse scan ahead of the ego, then golden-section refinement inside the
  // best bracket. 0.5 m sampling cannot skip the basin of the closest point
  // for vehicle-scale geometry.
  constexpr double kSampleStep = 0.5;
  const int n = std::max(2, static_cast<int>(std::ceil(search_window / kSampleStep)));
  const double step = search_window / n;
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    const double d2 = dist2(ego.s + k * step);
    if (d2 < best) {
      best = d2;
      best_k = k;
    }
  }

  double lo = ego.s + std::max(0, best_k - 1) * step;
  double hi = ego.s + std::min(n, best_k + 1) * step;
  constexpr double kInvPhi = 0.6180339887498949;
  double a = hi - kInvPhi * (hi - lo);
  double b = lo + kInvPhi * (hi - lo);
  double fa = dist2(a);
  double fb = dist2(b);
  while (hi - lo > 1e-9) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - kInvPhi * (hi - lo);
      fa = dist2(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + kInvPhi * (hi - lo);
      fb = dist2(b);
    }
  }
  const double s_star = 0.5 * (lo + hi);

  // A projection pinned to either end of the window means the vehicle is not
  // genuinely ahead on this path (behind the ego, or past the horizon).
  if (s_star - ego.s < 1e-6 || s_star - ego.s > search_window - 1e-6) return std::nullopt;

  const PathPoint p = eval_extended(ego_path, s_star);
  const double tangent_norm = std::hypot(p.dx, p.dy);
  if (tangent_norm < 1e-9) return std::nullopt;

  PathCast cast;
  cast.d = s_star - ego.s;
  cast.r = ego.v - (follow_vx * p.dx + follow_vy * p.dy) / tangent_norm;
  return cast;
}

}  // namespace decnash
