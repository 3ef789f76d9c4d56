#pragma once

#include <numbers>
#include <optional>
#include <vector>

#include "decnash/path.hpp"
#include "decnash/vehicle.hpp"

namespace decnash {

/// Car-following parameters for the longitudinal acceleration law, plus the
/// follow-vehicle selection cone. Defaults follow common traffic-simulation
/// practice; scenarios can override every field.
struct IdmParams {
  double d_min = 2.0;        ///< standstill gap the driver tolerates, meters
  double tau = 1.5;          ///< desired time headway, seconds
  double a_max = 3.0;        ///< acceleration limit, m/s^2
  double b_pref = 2.0;       ///< comfortable deceleration, m/s^2
  double v_target = 10.0;    ///< free-flow speed, m/s
  double follow_half_angle = std::numbers::pi / 9.0;  ///< 20-degree cone
  double b_emergency = 6.0;  ///< hard deceleration floor, m/s^2
};

/// Throws std::invalid_argument unless every field is positive and the cone
/// half-angle lies in (0, pi].
void validate(const IdmParams& params);

/// Euclidean-closest other vehicle inside the forward follow cone anchored at
/// the ego position and aligned with the ego path heading, or nullopt when the
/// cone is empty. A coincident vehicle counts as in-cone; exact distance ties
/// break toward the smaller id.
std::optional<int> select_follow(const VehicleState& ego, const PathPolynomial& ego_path,
                                 const std::vector<VehicleState>& others,
                                 const IdmParams& params);

/// Free-flow acceleration: nobody ahead, so the gap term vanishes.
double idm_accel(double v, const IdmParams& params);

/// Car-following acceleration for gap d (meters) closing at rate r (m/s,
/// positive when the gap is shrinking). The result is clamped to
/// [-b_emergency, a_max]; a non-positive gap returns the emergency floor.
double idm_accel(double v, double d, double r, const IdmParams& params);

/// A follow vehicle reduced to the quantities the acceleration law needs,
/// measured along the ego path.
struct PathCast {
  double d = 0.0;  ///< arc distance from ego to the projected follow position
  double r = 0.0;  ///< closing speed along the ego path tangent at the projection
};

/// Projects the follow vehicle's position onto the ego path, searching ahead
/// of the ego within `search_window` meters of arc progress (dense sampling at
/// 0.5 m followed by golden-section refinement; closed-form projection does
/// not exist for high-degree polynomials). Returns nullopt when the closest
/// point is not strictly ahead of the ego or sits at the far end of the
/// window, i.e. the vehicle is not actually in the ego's lane of travel.
std::optional<PathCast> cast_to_path(const VehicleState& ego, const PathPolynomial& ego_path,
                                     double follow_x, double follow_y, double follow_vx,
                                     double follow_vy, double search_window = 40.0);

}  // namespace decnash
