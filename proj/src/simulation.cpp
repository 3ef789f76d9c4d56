#include "decnash/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>

#include "decnash/dynamics.hpp"
#include "decnash/errors.hpp"
#include "decnash/game.hpp"
#include "decnash/path.hpp"
#include "decnash/rng.hpp"

namespace decnash {

const char* policy_name(Policy policy) {
  switch (policy) {
    case Policy::kDecNash: return "decnash";
    case Policy::kCentralized: return "centralized";
    case Policy::kIdm: return "idm";
  }
  throw std::invalid_argument("unrepresentable policy value");
}

Policy policy_from_name(const std::string& name) {
  if (name == "decnash") return Policy::kDecNash;
  if (name == "centralized") return Policy::kCentralized;
  if (name == "idm") return Policy::kIdm;
  throw std::invalid_argument("unknown policy '" + name +
                              "' (expected decnash, centralized, or idm)");
}

void validate(const Scenario& scenario) {
  if (!(scenario.sim_duration >= 0.0)) {
    throw std::invalid_argument("sim_duration must be non-negative");
  }
  if (!(scenario.sim_dt > 0.0)) throw std::invalid_argument("sim_dt must be positive");
  if (!(scenario.plan_dt > 0.0)) throw std::invalid_argument("plan_dt must be positive");
  const double steps = scenario.plan_horizon / scenario.plan_dt;
  if (!(steps >= 1.0) || std::abs(steps - std::round(steps)) > 1e-9) {
    throw std::invalid_argument("plan_horizon must be a positive integer multiple of plan_dt");
  }
  if (!(scenario.r_safe > 0.0)) throw std::invalid_argument("r_safe must be positive");
  if (!(scenario.plan_margin >= 1.0)) {
    throw std::invalid_argument("plan_margin must be at least 1");
  }
  if (!(scenario.spawn_jitter >= 0.0)) {
    throw std::invalid_argument("spawn_jitter must be non-negative");
  }
  validate(scenario.observation);
  validate(scenario.idm);
  validate(scenario.solver);
  std::set<int> ids;
  for (const auto& entry : scenario.vehicles) {
    validate(entry.params);
    if (entry.v0 && !(*entry.v0 >= 0.0)) {
      throw std::invalid_argument("vehicle v0 must be non-negative");
    }
    if (!ids.insert(entry.id).second) {
      throw std::invalid_argument("duplicate vehicle id " + std::to_string(entry.id));
    }
  }
}

void CollisionTracker::update(const std::vector<VehicleState>& states) {
  for (size_t i = 0; i < states.size(); ++i) {
    for (size_t j = i + 1; j < states.size(); ++j) {
      const auto key = std::minmax(states[i].id, states[j].id);
      const double dist = std::hypot(states[i].p_x - states[j].p_x,
                                     states[i].p_y - states[j].p_y);
      const bool inside = open_.count(key) > 0;
      if (!inside && dist < r_safe_) {
        open_.insert(key);
        ++events_;
      } else if (inside && dist > 1.1 * r_safe_) {
        open_.erase(key);
      }
    }
  }
}

void CollisionTracker::forget(int id) {
  for (auto it = open_.begin(); it != open_.end();) {
    if (it->first == id || it->second == id) {
      it = open_.erase(it);
    } else {
      ++it;
    }
  }
}

MetricsSummary summarize(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize needs at least one run");
  MetricsSummary out;
  out.runs = static_cast<int>(runs.size());
  for (const auto& report : runs) {
    out.collisions_per_100s += report.collisions_per_100s;
    out.mean_speed_shortfall += report.mean_speed_shortfall;
    out.max_players_per_game += report.max_players_per_game;
    out.solver_failures += report.solver_failures;
    double time_sum = 0.0;
    int busy_frames = 0;
    for (size_t k = 0; k < report.policy_gen_time.size(); ++k) {
      if (report.active_per_frame[k] > 0) {
        time_sum += report.policy_gen_time[k];
        ++busy_frames;
      }
    }
    out.mean_policy_gen_time += busy_frames > 0 ? time_sum / busy_frames : 0.0;
  }
  const double n = static_cast<double>(out.runs);
  out.collisions_per_100s /= n;
  out.mean_speed_shortfall /= n;
  out.max_players_per_game /= n;
  out.mean_policy_gen_time /= n;
  out.solver_failures /= n;
  return out;
}

namespace {

// One component solve: the game plus everything needed to run it on a worker
// thread and merge results deterministically afterward.
struct GameTask {
  GameSpec spec;
  std::optional<JointPlan> warm;
  NashSolution sol;
  std::vector<TraceRow> trace;
};

void solve_all(std::vector<GameTask>& tasks, const SolverConfig& config, int n_threads,
               bool want_traces) {
  const auto solve_one = [&](GameTask& task) {
    task.sol = solve(task.spec, config, task.warm, want_traces ? &task.trace : nullptr);
  };
  if (n_threads <= 1 || tasks.size() <= 1) {
    for (auto& task : tasks) solve_one(task);
    return;
  }
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t k; (k = next.fetch_add(1)) < tasks.size();) solve_one(tasks[k]);
  };
  std::vector<std::thread> pool;
  const size_t width = std::min<size_t>(n_threads, tasks.size());
  pool.reserve(width);
  for (size_t k = 0; k < width; ++k) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
}

// Shift the previous frame's controls one plan step forward, repeating the
// final entry, so the warm start covers the receding horizon.
std::vector<double> shift_controls(const std::vector<double>& prev) {
  std::vector<double> out(prev.begin() + 1, prev.end());
  out.push_back(prev.back());
  return out;
}

std::optional<JointPlan> make_warm(const GameSpec& spec,
                                   const std::map<int, std::vector<double>>& stored) {
  const size_t horizon = static_cast<size_t>(spec.horizon_steps);
  std::vector<std::vector<double>> controls(spec.controlled.size(),
                                            std::vector<double>(horizon, 0.0));
  bool any = false;
  for (size_t i = 0; i < spec.controlled.size(); ++i) {
    const auto it = stored.find(spec.controlled[i].state.id);
    if (it == stored.end() || it->second.size() != horizon) continue;
    controls[i] = shift_controls(it->second);
    any = true;
  }
  if (!any) return std::nullopt;
  return rollout(spec, controls);
}

}  // namespace

SimResult run(const Scenario& scenario, int n_threads, const RunHooks* hooks) {
  validate(scenario);
  const int horizon = static_cast<int>(std::round(scenario.plan_horizon / scenario.plan_dt));
  const int n_frames = static_cast<int>(std::llround(scenario.sim_duration / scenario.sim_dt));
  const GameConfig game_config{horizon, scenario.plan_dt,
                               scenario.r_safe * scenario.plan_margin};

  // Effective spawn times: one jitter draw per vehicle, in declaration order,
  // so a given seed always yields the same entry pattern.
  Rng rng(scenario.seed);
  std::vector<double> spawn_at(scenario.vehicles.size());
  for (size_t i = 0; i < scenario.vehicles.size(); ++i) {
    spawn_at[i] = scenario.vehicles[i].params.spawn_time + rng.uniform(0.0, scenario.spawn_jitter);
  }

  SimResult result;
  result.metrics.duration = n_frames * scenario.sim_dt;
  std::vector<bool> spawned(scenario.vehicles.size(), false);
  std::vector<WorldVehicle> active;
  std::map<int, std::vector<double>> warm;  // per vehicle: last planned controls
  CollisionTracker tracker(scenario.r_safe);
  double shortfall_sum = 0.0;
  long vehicle_steps = 0;

  for (int frame = 0; frame < n_frames; ++frame) {
    const double now = frame * scenario.sim_dt;

    // --- Spawns -----------------------------------------------------------
    for (size_t i = 0; i < scenario.vehicles.size(); ++i) {
      if (spawned[i] || spawn_at[i] > now + 1e-9) continue;
      const SpawnEntry& entry = scenario.vehicles[i];
      const Eigen::Vector2d door = eval_position(entry.params.path, 0.0);
      if (scenario.defer_spawn) {
        const bool blocked = std::any_of(active.begin(), active.end(), [&](const auto& veh) {
          return std::hypot(veh.state.p_x - door.x(), veh.state.p_y - door.y()) <
                 scenario.r_safe;
        });
        if (blocked) continue;  // try again next frame
      }
      WorldVehicle veh;
      veh.params = entry.params;
      veh.state.id = entry.id;
      veh.state.s = 0.0;
      veh.state.v = entry.v0.value_or(entry.params.v_target);
      refresh_position(veh.state, veh.params.path);
      active.push_back(veh);
      spawned[i] = true;
    }
    std::sort(active.begin(), active.end(),
              [](const auto& a, const auto& b) { return a.state.id < b.state.id; });

    std::vector<VehicleState> states;
    states.reserve(active.size());
    for (const auto& veh : active) states.push_back(veh.state);
    tracker.update(states);

    // --- Plan -------------------------------------------------------------
    std::map<int, double> control_of;
    std::map<int, int> game_of;
    std::map<int, int> size_of;
    double gen_time = 0.0;
    int largest_game = 0;
    int n_games = 0;

    if (!active.empty() && scenario.policy == Policy::kIdm) {
      const auto started = std::chrono::steady_clock::now();
      for (const auto& veh : active) {
        IdmParams params = scenario.idm;
        params.v_target = veh.params.v_target;
        std::vector<VehicleState> others;
        for (const auto& other : active) {
          if (other.state.id != veh.state.id) others.push_back(other.state);
        }
        double u;
        std::optional<int> follow;
        try {
          follow = select_follow(veh.state, veh.params.path, others, params);
        } catch (const DegenerateGeometryError&) {
          follow = std::nullopt;  // no usable heading: fall back to free flow
        }
        if (follow) {
          const auto leader = std::find_if(active.begin(), active.end(), [&](const auto& w) {
            return w.state.id == *follow;
          });
          const Eigen::Vector2d tangent =
              eval_tangent(leader->params.path, leader->state.s, 1.0);
          const double norm = tangent.norm();
          double fvx = 0.0, fvy = 0.0;
          if (norm > 1e-9) {
            fvx = leader->state.v * tangent.x() / norm;
            fvy = leader->state.v * tangent.y() / norm;
          }
          const auto cast = cast_to_path(veh.state, veh.params.path, leader->state.p_x,
                                         leader->state.p_y, fvx, fvy);
          u = cast ? idm_accel(veh.state.v, cast->d, cast->r, params)
                   : idm_accel(veh.state.v, params);
        } else {
          u = idm_accel(veh.state.v, params);
        }
        control_of[veh.state.id] = u;
        game_of[veh.state.id] = -1;
        size_of[veh.state.id] = 1;
      }
      gen_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                     .count();
      largest_game = 1;
      n_games = 0;
    } else if (!active.empty()) {
      std::vector<GameTask> tasks;
      if (scenario.policy == Policy::kCentralized) {
        std::vector<int> everyone;
        for (const auto& veh : active) everyone.push_back(veh.state.id);
        GameTask task;
        task.spec = build_game(everyone, {}, active, game_config);
        task.warm = make_warm(task.spec, warm);
        tasks.push_back(std::move(task));
      } else {
        const InteractionGraph graph = build_graph(active, scenario.observation);
        const SccDecomposition scc = scc_decompose(graph);
        if (hooks && hooks->on_graph) hooks->on_graph(now, graph, scc);
        std::vector<size_t> order(scc.components.size());
        for (size_t c = 0; c < order.size(); ++c) order[c] = c;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
          return scc.components[a][0] < scc.components[b][0];
        });
        for (const size_t c : order) {
          GameTask task;
          task.spec = build_game(scc.components[c], scc.outgoing[c], active, game_config);
          task.warm = make_warm(task.spec, warm);
          tasks.push_back(std::move(task));
        }
      }

      const bool want_traces = hooks && hooks->on_trace;
      solve_all(tasks, scenario.solver, n_threads, want_traces);
      n_games = static_cast<int>(tasks.size());

      for (size_t g = 0; g < tasks.size(); ++g) {
        const GameTask& task = tasks[g];
        if (hooks && hooks->on_trace) hooks->on_trace(now, static_cast<int>(g), task.trace);
        if (hooks && hooks->on_solution) hooks->on_solution(now, task.spec, task.sol);
        if (!task.sol.converged) ++result.metrics.solver_failures;
        gen_time = std::max(gen_time, task.sol.wall_time);
        const int players = task.spec.n_controlled();
        largest_game = std::max(largest_game, players);
        for (int i = 0; i < players; ++i) {
          const int id = task.spec.controlled[i].state.id;
          control_of[id] = task.sol.plan.controls[i][0];
          game_of[id] = static_cast<int>(g);
          size_of[id] = players;
          warm[id] = task.sol.plan.controls[i];
        }
        if (players > result.snapshot.game_size) {
          result.snapshot.time = now;
          result.snapshot.game_size = players;
          result.snapshot.vehicles.clear();
          for (int k = 0; k < task.spec.n_total(); ++k) {
            PlanSnapshot::VehiclePlan plan;
            plan.controlled = k < players;
            plan.id = plan.controlled ? task.spec.controlled[k].state.id
                                      : task.spec.observed[k - players].state.id;
            for (const auto& state : task.sol.plan.trajectories[k]) {
              plan.x.push_back(state.p_x);
              plan.y.push_back(state.p_y);
              plan.v.push_back(state.v);
            }
            result.snapshot.vehicles.push_back(std::move(plan));
          }
        }
      }
    }

    // --- Log and metrics ----------------------------------------------------
    for (const auto& veh : active) {
      TrajectoryRow row;
      row.time = now;
      row.vehicle_id = veh.state.id;
      row.s = veh.state.s;
      row.v = veh.state.v;
      row.x = veh.state.p_x;
      row.y = veh.state.p_y;
      row.u = control_of.at(veh.state.id);
      row.game_id = game_of.at(veh.state.id);
      row.game_size = size_of.at(veh.state.id);
      result.log.push_back(row);
      shortfall_sum += veh.params.v_target - veh.state.v;
      ++vehicle_steps;
    }
    result.metrics.players_per_frame.push_back(active.empty() ? 0 : largest_game);
    result.metrics.games_per_frame.push_back(n_games);
    result.metrics.active_per_frame.push_back(static_cast<int>(active.size()));
    result.metrics.policy_gen_time.push_back(gen_time);

    // --- Execute and retire -------------------------------------------------
    std::vector<WorldVehicle> still_active;
    still_active.reserve(active.size());
    for (auto& veh : active) {
      const StepResult next =
          step(veh.state, veh.params.path, control_of.at(veh.state.id), scenario.sim_dt);
      veh.state = next.state;
      if (next.path_complete) {
        tracker.forget(veh.state.id);
        warm.erase(veh.state.id);
      } else {
        still_active.push_back(veh);
      }
    }
    active = std::move(still_active);
  }

  result.metrics.collision_events = tracker.events();
  result.metrics.collisions_per_100s =
      result.metrics.duration > 0.0
          ? tracker.events() * 100.0 / result.metrics.duration
          : 0.0;
  result.metrics.mean_speed_shortfall =
      vehicle_steps > 0 ? shortfall_sum / static_cast<double>(vehicle_steps) : 0.0;
  for (const int players : result.metrics.players_per_frame) {
    result.metrics.max_players_per_game =
        std::max(result.metrics.max_players_per_game, players);
  }
  return result;
}

}  // namespace decnash
