#pragma once

#include "decnash/path.hpp"

namespace decnash {

/// Minimal per-vehicle state: arc progress and speed along the fixed path,
/// plus the cached planar position derived from the path.
struct VehicleState {
  int id = -1;
  double s = 0.0;    ///< arc progress, meters
  double v = 0.0;    ///< speed, m/s, kept >= 0
  double p_x = 0.0;  ///< cached eval_position(path, s)
  double p_y = 0.0;
};

/// Static per-vehicle data: the path it follows, objective weights, control
/// bounds, and when it enters the scene.
struct VehicleParams {
  PathPolynomial path;
  double v_target = 10.0;  ///< desired free-flow speed, m/s
  double q = 1.0;          ///< weight on squared speed error
  double r = 0.5;          ///< weight on squared acceleration
  double u_min = -6.0;     ///< m/s^2, must be < 0
  double u_max = 3.0;      ///< m/s^2, must be > 0
  double spawn_time = 0.0; ///< seconds
};

/// Throws std::invalid_argument on violated invariants.
void validate(const VehicleParams& params);

/// Recompute the cached position from (path, s).
void refresh_position(VehicleState& state, const PathPolynomial& path);

struct WorldVehicle {
  VehicleState state;
  VehicleParams params;
};

}  // namespace decnash
