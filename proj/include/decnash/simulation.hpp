#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "decnash/idm.hpp"
#include "decnash/interaction_graph.hpp"
#include "decnash/nash_solver.hpp"
#include "decnash/vehicle.hpp"

namespace decnash {

enum class Policy { kDecNash, kCentralized, kIdm };

/// Scenario-file spelling of a policy ("decnash", "centralized", "idm").
const char* policy_name(Policy policy);

/// Inverse of policy_name. Throws std::invalid_argument for unknown names.
Policy policy_from_name(const std::string& name);

/// One vehicle as declared by a scenario: identity, static parameters, and
/// the speed it enters the scene with.
struct SpawnEntry {
  int id = -1;
  VehicleParams params;
  std::optional<double> v0;  ///< entry speed; defaults to v_target
};

struct Scenario {
  std::vector<SpawnEntry> vehicles;
  double sim_duration = 100.0;  ///< seconds
  double sim_dt = 0.1;          ///< execution step; replanning happens every step
  double plan_dt = 0.2;         ///< in-game discretization
  double plan_horizon = 4.0;    ///< seconds; must be an integer multiple of plan_dt
  ObservationModel observation;
  double r_safe = 3.0;
  /// Games plan against r_safe * plan_margin. Holding the bare radius at the
  /// 0.2 s plan knots lets the continuous motion graze just below it between
  /// knots; the margin absorbs that sampled-data undershoot.
  double plan_margin = 1.15;
  Policy policy = Policy::kDecNash;
  uint64_t seed = 0;
  double spawn_jitter = 0.0;  ///< per-vehicle uniform spawn delay in [0, jitter), seeded
  bool defer_spawn = false;   ///< hold a spawn while its entry point is blocked
  IdmParams idm;              ///< v_target field unused (taken per vehicle)
  SolverConfig solver;
};

/// Throws std::invalid_argument on violated invariants (including every
/// nested parameter block and duplicate vehicle ids).
void validate(const Scenario& scenario);

/// One line of the trajectory log: the state of one active vehicle at one
/// frame, the control applied over the following step, and which game
/// produced it.
struct TrajectoryRow {
  double time = 0.0;
  int vehicle_id = -1;
  double s = 0.0, v = 0.0, x = 0.0, y = 0.0, u = 0.0;
  int game_id = -1;   ///< per-frame game index; -1 under the car-following policy
  int game_size = 1;  ///< players (controlled vehicles) in that game
};

/// Planned trajectories of the largest game encountered, kept for plotting.
struct PlanSnapshot {
  double time = -1.0;  ///< negative when no game was recorded
  int game_size = 0;
  struct VehiclePlan {
    int id = -1;
    bool controlled = true;
    std::vector<double> x, y, v;  ///< horizon_steps + 1 points each
  };
  std::vector<VehiclePlan> vehicles;
};

struct MetricsReport {
  double duration = 0.0;  ///< simulated seconds
  int collision_events = 0;
  double collisions_per_100s = 0.0;
  double mean_speed_shortfall = 0.0;  ///< mean over active vehicle-steps of v_target - v
  int max_players_per_game = 0;
  std::vector<int> players_per_frame;    ///< largest game each frame (0 when empty)
  std::vector<int> games_per_frame;      ///< how many games were solved each frame
  std::vector<int> active_per_frame;     ///< vehicles in the scene each frame
  std::vector<double> policy_gen_time;   ///< per-frame planning seconds (max across
                                         ///< concurrent component solves)
  int solver_failures = 0;
};

struct SimResult {
  std::vector<TrajectoryRow> log;  ///< one row per active vehicle per frame, id-sorted
  MetricsReport metrics;
  PlanSnapshot snapshot;
};

/// Optional per-frame artifact sinks; unset members are skipped. The trace
/// hook receives the per-frame game index alongside the solver trace, and the
/// solution hook fires once per solved game in deterministic game order.
struct RunHooks {
  std::function<void(double time, const InteractionGraph&, const SccDecomposition&)> on_graph;
  std::function<void(double time, int game, const std::vector<TraceRow>&)> on_trace;
  std::function<void(double time, const GameSpec&, const NashSolution&)> on_solution;
};

/// Closed-loop receding-horizon simulation. Each frame: spawn due vehicles,
/// plan under the scenario policy, log, hold each vehicle's first planned
/// control for one sim step, and retire vehicles that finished their paths.
/// Solver non-convergence applies the best iterate and counts a failure.
/// `n_threads` caps concurrent per-component solves (<= 1 means sequential);
/// results are identical either way.
SimResult run(const Scenario& scenario, int n_threads = 0, const RunHooks* hooks = nullptr);

/// Hysteresis collision counter. An event for a pair opens when their center
/// distance drops below r_safe and closes only once it exceeds 1.1 * r_safe;
/// each event counts once no matter how many frames it spans.
class CollisionTracker {
 public:
  explicit CollisionTracker(double r_safe) : r_safe_(r_safe) {}

  /// Feed one frame of active-vehicle states.
  void update(const std::vector<VehicleState>& states);

  /// Drop a vehicle that left the scene (its open events just end).
  void forget(int id);

  int events() const { return events_; }

 private:
  double r_safe_;
  int events_ = 0;
  std::set<std::pair<int, int>> open_;
};

/// Cross-run means of every metric, for the policy comparison table.
struct MetricsSummary {
  int runs = 0;
  double collisions_per_100s = 0.0;
  double mean_speed_shortfall = 0.0;
  double max_players_per_game = 0.0;
  double mean_policy_gen_time = 0.0;  ///< mean over frames that had any vehicle
  double solver_failures = 0.0;
};

MetricsSummary summarize(const std::vector<MetricsReport>& runs);

}  // namespace decnash
