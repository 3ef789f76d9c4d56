#include "decnash/vehicle.hpp"

#include <stdexcept>

#include "decnash/path.hpp"

namespace decnash {

void validate(const VehicleParams& params) {
  validate(params.path);
  if (!(params.v_target > 0.0)) {
    throw std::invalid_argument("v_target must be positive");
  }
  if (!(params.q > 0.0) || !(params.r > 0.0)) {
    throw std::invalid_argument("cost weights q and r must be positive");
  }
  if (!(params.u_min < 0.0) || !(params.u_max > 0.0)) {
    throw std::invalid_argument("control bounds must satisfy u_min < 0 < u_max");
  }
  if (params.spawn_time < 0.0) {
    throw std::invalid_argument("spawn_time must be non-negative");
  }
}

void refresh_position(VehicleState& state, const PathPolynomial& path) {
  const Eigen::Vector2d pos = eval_position(path, state.s);
  state.p_x = pos.x();
  state.p_y = pos.y();
}

}  // namespace decnash
