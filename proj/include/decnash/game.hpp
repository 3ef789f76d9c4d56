#pragma once

#include <vector>

#include "decnash/vehicle.hpp"

namespace decnash {

// One trajectory game over a fixed horizon: the members of one strongly
// connected component play; vehicles they observe outside it move along
// pinned forecast controls.
struct ControlledVehicle {
  VehicleState state;
  VehicleParams params;
};

struct ObservedVehicle {
  VehicleState state;
  VehicleParams params;
  std::vector<double> forecast;  // pinned controls over the horizon
};

struct GameSpec {
  std::vector<ControlledVehicle> controlled;
  std::vector<ObservedVehicle> observed;
  int horizon_steps = 20;
  double dt = 0.2;
  double r_safe = 3.0;  // minimum separation, meters

  int n_controlled() const { return static_cast<int>(controlled.size()); }
  int n_total() const { return static_cast<int>(controlled.size() + observed.size()); }
};

void validate(const GameSpec& spec);

// Joint open-loop plan. Trajectories hold T+1 states per vehicle (slot 0 is
// the initial state), controlled players first, observed after, and are the
// rollout of the controls/forecasts through the in-game (unclamped) dynamics.
struct JointPlan {
  std::vector<std::vector<double>> controls;            // N_c x T
  std::vector<std::vector<VehicleState>> trajectories;  // N x (T+1)
};

struct GameConfig {
  int horizon_steps = 20;
  double dt = 0.2;
  double r_safe = 3.0;
};

// Assembles the game for one component: SCC members become players, observed
// targets of its outgoing edges move at constant velocity (zero forecast).
GameSpec build_game(const std::vector<int>& scc, const std::vector<int>& outgoing,
                    const std::vector<WorldVehicle>& world, const GameConfig& config);

// Rolls controls (and the observed forecasts) into full trajectories using
// the linear in-game dynamics; positions are refreshed through the path with
// linear extension past its ends.
JointPlan rollout(const GameSpec& spec, const std::vector<std::vector<double>>& controls);

// Player cost: sum over the horizon of q (v - v_target)^2 + r u^2.
double objective(const JointPlan& plan, const GameSpec& spec, int player);

// Gradient of the player cost with respect to that player's own packed
// decision vector [u_0..u_{T-1}, s_1, v_1, ..., s_T, v_T].
std::vector<double> objective_gradient(const JointPlan& plan, const GameSpec& spec, int player);

struct ConstraintResiduals {
  std::vector<double> equalities;    // dynamics defects, all vehicles, 2 per step
  std::vector<double> inequalities;  // <= 0 convention, fixed documented order
};

// Equalities: for every vehicle (controlled then observed) and every step,
// the (s, v) defects of the trajectory against the linear dynamics update.
// Inequalities, in order: per controlled player u_t - u_max and u_min - u_t
// (t = 0..T-1), then -v_t (t = 1..T); then r_safe^2 - squared distance for
// every vehicle pair with at least one controlled member (pairs in joint-index
// lexicographic order, t = 1..T within each pair).
ConstraintResiduals constraint_residuals(const JointPlan& plan, const GameSpec& spec);

// Joint-index pairs (a < b) that carry collision constraints.
std::vector<std::pair<int, int>> collision_pairs(const GameSpec& spec);

// One collision inequality with its derivatives through the two paths,
// evaluated at a given plan. Used by the equilibrium solver.
struct CollisionTerm {
  int a, b;  // joint vehicle indices, a < b
  int t;     // 1..T
  double g;  // r_safe^2 - dist^2 (<= 0 when feasible)
  double dg_dsa, dg_dsb;
  double d2g_dsasa, d2g_dsbsb, d2g_dsasb;
};

std::vector<CollisionTerm> collision_terms(const JointPlan& plan, const GameSpec& spec);

}  // namespace decnash
