#include "decnash/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "decnash/path.hpp"

namespace decnash {

void step_linear(double& s, double& v, double u, double dt) {
  s += v * dt + 0.5 * u * dt * dt;
  v += u * dt;
}

StepResult step(const VehicleState& state, const PathPolynomial& path, double u, double dt) {
  double s = state.s;
  double v = state.v;
  const double v_next = v + u * dt;

  if (v_next >= 0.0) {
    s += v * dt + 0.5 * u * dt * dt;
    v = v_next;
  } else if (v <= 0.0) {
    // Already stopped and decelerating: the vehicle stays put.
    v = 0.0;
  } else {
    // Crosses zero speed mid-step: integrate up to the stop time, then hold.
    const double t_stop = -v / u;
    s += v * t_stop + 0.5 * u * t_stop * t_stop;
    v = 0.0;
  }

  StepResult result;
  result.state = state;
  result.state.s = s;
  result.state.v = v;
  result.path_complete = s >= path.s_max;
  result.state.s = std::min(s, path.s_max);
  refresh_position(result.state, path);
  return result;
}

StateJacobians state_jacobians(double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("dt must be positive");
  }
  StateJacobians jac;
  jac.A << 1.0, dt, 0.0, 1.0;
  jac.B << 0.5 * dt * dt, dt;
  return jac;
}

}  // namespace decnash
