#include "decnash/game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "decnash/dynamics.hpp"
#include "decnash/path.hpp"

namespace decnash {

namespace {

void check_plan_dimensions(const JointPlan& plan, const GameSpec& spec) {
  const size_t T = static_cast<size_t>(spec.horizon_steps);
  if (plan.controls.size() != spec.controlled.size()) {
    throw std::invalid_argument("plan controls do not match the controlled player count");
  }
  for (const auto& u : plan.controls) {
    if (u.size() != T) throw std::invalid_argument("control sequence length mismatch");
  }
  if (plan.trajectories.size() != static_cast<size_t>(spec.n_total())) {
    throw std::invalid_argument("plan trajectories do not cover all vehicles");
  }
  for (const auto& traj : plan.trajectories) {
    if (traj.size() != T + 1) throw std::invalid_argument("trajectory length mismatch");
  }
}

const VehicleParams& joint_params(const GameSpec& spec, int joint_index) {
  const int nc = spec.n_controlled();
  return joint_index < nc ? spec.controlled[joint_index].params
                          : spec.observed[joint_index - nc].params;
}

// In-game position refresh: linear extension keeps positions defined when a
// plan runs past the path end mid-solve.
void refresh_extended(VehicleState& state, const PathPolynomial& path) {
  const PathPoint pt = eval_extended(path, state.s);
  state.p_x = pt.x;
  state.p_y = pt.y;
}

}  // namespace

void validate(const GameSpec& spec) {
  if (spec.controlled.empty()) {
    throw std::invalid_argument("a game needs at least one controlled player");
  }
  if (spec.horizon_steps < 1) {
    throw std::invalid_argument("horizon must be at least one step");
  }
  if (!(spec.dt > 0.0) || !(spec.r_safe > 0.0)) {
    throw std::invalid_argument("dt and r_safe must be positive");
  }
  for (const auto& veh : spec.observed) {
    if (veh.forecast.size() != static_cast<size_t>(spec.horizon_steps)) {
      throw std::invalid_argument("forecast length must equal the horizon");
    }
  }
}

GameSpec build_game(const std::vector<int>& scc, const std::vector<int>& outgoing,
                    const std::vector<WorldVehicle>& world, const GameConfig& config) {
  if (scc.empty()) {
    throw std::invalid_argument("component must contain at least one vehicle");
  }
  GameSpec spec;
  spec.horizon_steps = config.horizon_steps;
  spec.dt = config.dt;
  spec.r_safe = config.r_safe;

  auto find_vehicle = [&world](int id) -> const WorldVehicle& {
    for (const auto& veh : world) {
      if (veh.state.id == id) return veh;
    }
    throw std::invalid_argument("vehicle id " + std::to_string(id) + " not in the world");
  };

  for (int id : scc) {
    const auto& veh = find_vehicle(id);
    spec.controlled.push_back({veh.state, veh.params});
  }
  for (int id : outgoing) {
    if (std::find(scc.begin(), scc.end(), id) != scc.end()) {
      throw std::invalid_argument("observed vehicle " + std::to_string(id) +
                                  " is already a player");
    }
    const auto& veh = find_vehicle(id);
    // Constant-velocity forecast: the observed vehicle holds its speed.
    spec.observed.push_back(
        {veh.state, veh.params, std::vector<double>(config.horizon_steps, 0.0)});
  }
  validate(spec);
  return spec;
}

JointPlan rollout(const GameSpec& spec, const std::vector<std::vector<double>>& controls) {
  const int T = spec.horizon_steps;
  if (controls.size() != spec.controlled.size()) {
    throw std::invalid_argument("rollout controls do not match the controlled player count");
  }
  JointPlan plan;
  plan.controls = controls;
  plan.trajectories.resize(spec.n_total());

  for (int i = 0; i < spec.n_total(); ++i) {
    const bool is_controlled = i < spec.n_controlled();
    const auto& start =
        is_controlled ? spec.controlled[i].state : spec.observed[i - spec.n_controlled()].state;
    const auto& params = joint_params(spec, i);
    const std::vector<double>& u_seq =
        is_controlled ? controls[i] : spec.observed[i - spec.n_controlled()].forecast;
    if (u_seq.size() != static_cast<size_t>(T)) {
      throw std::invalid_argument("control sequence length mismatch in rollout");
    }

    auto& traj = plan.trajectories[i];
    traj.resize(T + 1);
    traj[0] = start;
    double s = start.s;
    double v = start.v;
    for (int t = 0; t < T; ++t) {
      step_linear(s, v, u_seq[t], spec.dt);
      traj[t + 1] = start;
      traj[t + 1].s = s;
      traj[t + 1].v = v;
      refresh_extended(traj[t + 1], params.path);
    }
  }
  return plan;
}

double objective(const JointPlan& plan, const GameSpec& spec, int player) {
  check_plan_dimensions(plan, spec);
  if (player < 0 || player >= spec.n_controlled()) {
    throw std::invalid_argument("objective is defined for controlled players only");
  }
  const auto& params = spec.controlled[player].params;
  const auto& traj = plan.trajectories[player];
  const auto& u = plan.controls[player];
  double cost = 0.0;
  for (int t = 0; t < spec.horizon_steps; ++t) {
    const double dv = traj[t + 1].v - params.v_target;
    cost += params.q * dv * dv + params.r * u[t] * u[t];
  }
  return cost;
}

std::vector<double> objective_gradient(const JointPlan& plan, const GameSpec& spec, int player) {
  check_plan_dimensions(plan, spec);
  if (player < 0 || player >= spec.n_controlled()) {
    throw std::invalid_argument("objective is defined for controlled players only");
  }
  const int T = spec.horizon_steps;
  const auto& params = spec.controlled[player].params;
  const auto& traj = plan.trajectories[player];
  const auto& u = plan.controls[player];
  std::vector<double> grad(3 * T, 0.0);
  for (int t = 0; t < T; ++t) {
    grad[t] = 2.0 * params.r * u[t];                                    // d/du_t
    grad[T + 2 * t + 1] = 2.0 * params.q * (traj[t + 1].v - params.v_target);  // d/dv_{t+1}
  }
  return grad;
}

ConstraintResiduals constraint_residuals(const JointPlan& plan, const GameSpec& spec) {
  check_plan_dimensions(plan, spec);
  const int T = spec.horizon_steps;
  const int nc = spec.n_controlled();
  ConstraintResiduals res;

  for (int i = 0; i < spec.n_total(); ++i) {
    const std::vector<double>& u_seq =
        i < nc ? plan.controls[i] : spec.observed[i - nc].forecast;
    const auto& traj = plan.trajectories[i];
    for (int t = 0; t < T; ++t) {
      double s = traj[t].s;
      double v = traj[t].v;
      step_linear(s, v, u_seq[t], spec.dt);
      res.equalities.push_back(traj[t + 1].s - s);
      res.equalities.push_back(traj[t + 1].v - v);
    }
  }

  for (int i = 0; i < nc; ++i) {
    const auto& params = spec.controlled[i].params;
    for (int t = 0; t < T; ++t) {
      res.inequalities.push_back(plan.controls[i][t] - params.u_max);
      res.inequalities.push_back(params.u_min - plan.controls[i][t]);
    }
    for (int t = 1; t <= T; ++t) {
      res.inequalities.push_back(-plan.trajectories[i][t].v);
    }
  }

  const double r2 = spec.r_safe * spec.r_safe;
  for (const auto& [a, b] : collision_pairs(spec)) {
    for (int t = 1; t <= T; ++t) {
      const auto& sa = plan.trajectories[a][t];
      const auto& sb = plan.trajectories[b][t];
      const double dx = sa.p_x - sb.p_x;
      const double dy = sa.p_y - sb.p_y;
      res.inequalities.push_back(r2 - (dx * dx + dy * dy));
    }
  }
  return res;
}

std::vector<std::pair<int, int>> collision_pairs(const GameSpec& spec) {
  std::vector<std::pair<int, int>> pairs;
  const int nc = spec.n_controlled();
  const int n = spec.n_total();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (a >= nc && b >= nc) continue;  // observed-observed pairs carry no constraint
      pairs.emplace_back(a, b);
    }
  }
  return pairs;
}

std::vector<CollisionTerm> collision_terms(const JointPlan& plan, const GameSpec& spec) {
  check_plan_dimensions(plan, spec);
  const double r2 = spec.r_safe * spec.r_safe;
  std::vector<CollisionTerm> terms;
  for (const auto& [a, b] : collision_pairs(spec)) {
    const auto& path_a = joint_params(spec, a).path;
    const auto& path_b = joint_params(spec, b).path;
    for (int t = 1; t <= spec.horizon_steps; ++t) {
      const PathPoint pa = eval_extended(path_a, plan.trajectories[a][t].s);
      const PathPoint pb = eval_extended(path_b, plan.trajectories[b][t].s);
      const double dx = pa.x - pb.x;
      const double dy = pa.y - pb.y;
      CollisionTerm term;
      term.a = a;
      term.b = b;
      term.t = t;
      term.g = r2 - (dx * dx + dy * dy);
      term.dg_dsa = -2.0 * (dx * pa.dx + dy * pa.dy);
      term.dg_dsb = 2.0 * (dx * pb.dx + dy * pb.dy);
      term.d2g_dsasa = -2.0 * (pa.dx * pa.dx + pa.dy * pa.dy + dx * pa.ddx + dy * pa.ddy);
      term.d2g_dsbsb = -2.0 * (pb.dx * pb.dx + pb.dy * pb.dy - dx * pb.ddx - dy * pb.ddy);
      term.d2g_dsasb = 2.0 * (pa.dx * pb.dx + pa.dy * pb.dy);
      terms.push_back(term);
    }
  }
  return terms;
}

}  // namespace decnash
