#pragma once

#include <Eigen/Core>

#include "decnash/vehicle.hpp"

namespace decnash {

struct StepResult {
  VehicleState state;
  bool path_complete = false;  ///< s reached s_max during this step
};

/// Advance one vehicle by dt under constant acceleration u. The (s, v)
/// subsystem is linear, so the exact double-integrator update is used:
/// s' = s + v dt + u dt^2 / 2, v' = v + u dt. Speed saturates at zero
/// (integrating piecewise through the stop time), s clamps at s_max, and the
/// cached position is refreshed from the path.
StepResult step(const VehicleState& state, const PathPolynomial& path, double u, double dt);

/// The same update without the v >= 0 and s_max clamps. Games treat speed
/// nonnegativity as an explicit inequality constraint, so their rollouts and
/// defect equations use this linear form.
void step_linear(double& s, double& v, double u, double dt);

struct StateJacobians {
  Eigen::Matrix2d A;  ///< d(s', v') / d(s, v)
  Eigen::Vector2d B;  ///< d(s', v') / du
};

/// Exact Jacobians of the linear (s, v) update; independent of the state.
/// Requires dt > 0.
StateJacobians state_jacobians(double dt);

}  // namespace decnash
