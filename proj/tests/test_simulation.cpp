#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include "decnash/simulation.hpp"

using decnash::MetricsReport;
using decnash::PathPolynomial;
using decnash::Policy;
using decnash::Scenario;
using decnash::SimResult;
using decnash::SpawnEntry;
using decnash::TrajectoryRow;
using decnash::VehicleState;

namespace {

PathPolynomial line_path(double x0, double y0, double angle, double len = 200.0) {
  return PathPolynomial{{x0, len * std::cos(angle)}, {y0, len * std::sin(angle)}, len, len};
}

SpawnEntry vehicle(int id, const PathPolynomial& path, double v_target,
                   double spawn_time = 0.0) {
  SpawnEntry entry;
  entry.id = id;
  entry.params.path = path;
  entry.params.v_target = v_target;
  entry.params.spawn_time = spawn_time;
  return entry;
}

// Two straight paths crossing at the origin; both vehicles reach the crossing
// around the same time unless someone yields.
Scenario crossing_scenario() {
  Scenario sc;
  sc.sim_duration = 12.0;
  auto a = vehicle(1, line_path(-60, 0, 0), 8.0);
  a.v0 = 8.0;
  auto b = vehicle(2, line_path(0, -60, std::numbers::pi / 2), 8.0);
  b.v0 = 7.5;
  sc.vehicles = {a, b};
  return sc;
}

std::map<double, std::vector<TrajectoryRow>> by_frame(const std::vector<TrajectoryRow>& log) {
  std::map<double, std::vector<TrajectoryRow>> frames;
  for (const auto& row : log) frames[row.time].push_back(row);
  return frames;
}

bool logs_equal(const std::vector<TrajectoryRow>& a, const std::vector<TrajectoryRow>& b) {
  if (a.size() != b.size()) return false;
  for (size_t k = 0; k < a.size(); ++k) {
    if (a[k].time != b[k].time || a[k].vehicle_id != b[k].vehicle_id || a[k].s != b[k].s ||
        a[k].v != b[k].v || a[k].x != b[k].x || a[k].y != b[k].y || a[k].u != b[k].u ||
        a[k].game_id != b[k].game_id || a[k].game_size != b[k].game_size) {
      return false;
    }
  }
  return true;
}

VehicleState state_at(int id, double x, double y) {
  VehicleState st;
  st.id = id;
  st.p_x = x;
  st.p_y = y;
  return st;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("an empty scenario produces empty logs and zero metrics") {
  Scenario sc;
  sc.sim_duration = 5.0;
  const SimResult result = decnash::run(sc);
  CHECK(result.log.empty());
  CHECK(result.metrics.collision_events == 0);
  CHECK(result.metrics.collisions_per_100s == 0.0);
  CHECK(result.metrics.mean_speed_shortfall == 0.0);
  CHECK(result.metrics.max_players_per_game == 0);
  CHECK(result.metrics.players_per_frame.size() == 50);
  CHECK(std::all_of(result.metrics.players_per_frame.begin(),
                    result.metrics.players_per_frame.end(),
                    [](int players) { return players == 0; }));
}

TEST_CASE("a lone vehicle at its target speed just cruises") {
  Scenario sc;
  sc.sim_duration = 10.0;
  auto solo = vehicle(1, line_path(0, 0, 0), 10.0);
  solo.v0 = 10.0;
  sc.vehicles = {solo};
  const SimResult result = decnash::run(sc);
  REQUIRE(result.log.size() == 100);
  for (const auto& row : result.log) {
    CHECK(std::abs(row.v - 10.0) < 1e-3);
    CHECK(row.game_size == 1);
  }
  CHECK(std::abs(result.metrics.mean_speed_shortfall) < 1e-3);
  CHECK(result.metrics.solver_failures == 0);
  CHECK(result.metrics.collision_events == 0);
}

TEST_CASE("crossing vehicles negotiate and keep their distance") {
  const SimResult result = decnash::run(crossing_scenario());
  CHECK(result.metrics.solver_failures == 0);
  CHECK(result.metrics.collision_events == 0);
  CHECK(result.metrics.max_players_per_game == 2);

  double closest = std::numeric_limits<double>::infinity();
  for (const auto& [time, rows] : by_frame(result.log)) {
    if (rows.size() == 2) {
      closest = std::min(closest, std::hypot(rows[0].x - rows[1].x, rows[0].y - rows[1].y));
    }
  }
  // The games plan against r_safe * plan_margin, so the executed motion should
  // clear the bare radius even between plan knots.
  CHECK(closest >= 3.0);
  CHECK(closest < 25.0);  // they genuinely met near the crossing
}

TEST_CASE("the collision counter fires once per dip") {
  decnash::CollisionTracker tracker(3.0);
  const auto frame = [&](double dist) {
    tracker.update({state_at(1, 0, 0), state_at(2, dist, 0)});
  };

  // Never inside the radius: nothing to count.
  for (double d : {5.0, 4.0, 3.5, 4.0}) frame(d);
  CHECK(tracker.events() == 0);

  // One five-frame dip is one event.
  for (double d : {2.0, 1.5, 1.0, 1.5, 2.5}) frame(d);
  CHECK(tracker.events() == 1);

  // Oscillating across r_safe without clearing 1.1 * r_safe stays one event.
  for (double d : {3.1, 2.9, 3.2, 2.8, 3.25}) frame(d);
  CHECK(tracker.events() == 1);

  // Clearing the hysteresis band and dipping again is a second event.
  frame(3.5);
  frame(2.0);
  CHECK(tracker.events() == 2);

  // A third vehicle joining inside the radius opens its own events.
  tracker.update({state_at(1, 0, 0), state_at(2, 2.0, 0), state_at(3, 1.0, 0)});
  CHECK(tracker.events() == 4);  // pairs (1,3) and (2,3) both begin
  tracker.forget(3);
  frame(3.5);
  frame(2.0);
  CHECK(tracker.events() == 5);
}

TEST_CASE("trajectory logs are deterministic and thread-count independent") {
  const Scenario sc = crossing_scenario();
  const SimResult a = decnash::run(sc, 0);
  const SimResult b = decnash::run(sc, 0);
  const SimResult c = decnash::run(sc, 4);
  CHECK(logs_equal(a.log, b.log));
  CHECK(logs_equal(a.log, c.log));
}

TEST_CASE("vehicles never roll backward") {
  const SimResult result = decnash::run(crossing_scenario());
  std::map<int, double> last_s;
  for (const auto& row : result.log) {
    const auto it = last_s.find(row.vehicle_id);
    if (it != last_s.end()) CHECK(row.s >= it->second - 1e-12);
    last_s[row.vehicle_id] = row.s;
  }
}

TEST_CASE("every active vehicle belongs to exactly one game per frame") {
  Scenario sc = crossing_scenario();
  // A third vehicle far away: it should form its own singleton game.
  auto loner = vehicle(3, line_path(500, 500, 0), 10.0);
  sc.vehicles.push_back(loner);
  const SimResult result = decnash::run(sc);

  for (const auto& [time, rows] : by_frame(result.log)) {
    std::map<int, int> game_members;  // game_id -> row count
    std::map<int, int> game_size;
    std::set<int> ids;
    for (const auto& row : rows) {
      CHECK(row.game_id >= 0);
      CHECK(ids.insert(row.vehicle_id).second);  // one row per vehicle
      ++game_members[row.game_id];
      game_size[row.game_id] = row.game_size;
    }
    int members = 0;
    for (const auto& [game, count] : game_members) {
      CHECK(count == game_size[game]);  // every player of the game is present
      members += count;
    }
    CHECK(members == static_cast<int>(rows.size()));
  }
}

TEST_CASE("vehicle presence is contiguous between spawn and retirement") {
  Scenario sc;
  sc.sim_duration = 30.0;
  auto early = vehicle(1, line_path(0, 0, 0, 100.0), 10.0);  // done after ~10 s
  auto late = vehicle(2, line_path(0, 50, 0, 100.0), 10.0, 4.0);
  sc.vehicles = {early, late};
  const SimResult result = decnash::run(sc);

  std::map<int, std::vector<double>> times;
  for (const auto& row : result.log) times[row.vehicle_id].push_back(row.time);
  REQUIRE(times.count(1) == 1);
  REQUIRE(times.count(2) == 1);

  CHECK(times[1].front() == 0.0);
  CHECK(times[2].front() == doctest::Approx(4.0));
  CHECK(times[1].back() < 11.0);  // retired when the path finished
  for (const auto& [id, seq] : times) {
    for (size_t k = 1; k < seq.size(); ++k) {
      CHECK(seq[k] - seq[k - 1] == doctest::Approx(0.1).epsilon(1e-9));
    }
  }
}

TEST_CASE("the car-following policy approaches its target speed monotonically") {
  Scenario sc;
  sc.policy = Policy::kIdm;
  sc.sim_duration = 20.0;
  auto solo = vehicle(1, line_path(0, 0, 0, 400.0), 10.0);
  solo.v0 = 2.0;
  sc.vehicles = {solo};
  const SimResult result = decnash::run(sc);
  REQUIRE(!result.log.empty());
  double prev = 0.0;
  for (const auto& row : result.log) {
    CHECK(row.v >= prev - 1e-12);
    CHECK(row.v <= 10.0 + 1e-9);
    CHECK(row.game_id == -1);
    prev = row.v;
  }
  CHECK(result.log.back().v > 9.9);
}

TEST_CASE("a car-following vehicle stays behind its leader") {
  Scenario sc;
  sc.policy = Policy::kIdm;
  sc.sim_duration = 25.0;
  const PathPolynomial lane = line_path(0, 0, 0, 400.0);
  auto leader = vehicle(1, lane, 5.0);
  auto chaser = vehicle(2, lane, 12.0, 3.0);  // faster, enters 3 s later
  sc.vehicles = {leader, chaser};
  const SimResult result = decnash::run(sc);

  const auto frames = by_frame(result.log);
  bool got_close = false;
  for (const auto& [time, rows] : frames) {
    if (rows.size() != 2) continue;
    const auto& first = rows[0].vehicle_id == 1 ? rows[0] : rows[1];
    const auto& second = rows[0].vehicle_id == 1 ? rows[1] : rows[0];
    CHECK(second.s < first.s);
    got_close = got_close || first.s - second.s < 20.0;
  }
  CHECK(got_close);
  CHECK(result.metrics.collision_events == 0);
}

TEST_CASE("centralized mode gathers everyone into one game") {
  Scenario sc;
  sc.policy = Policy::kCentralized;
  sc.sim_duration = 3.0;
  sc.vehicles = {vehicle(1, line_path(0, 0, 0), 8.0), vehicle(2, line_path(0, 100, 0), 8.0),
                 vehicle(3, line_path(0, 200, 0), 8.0)};
  const SimResult result = decnash::run(sc);
  CHECK(result.metrics.max_players_per_game == 3);
  for (const auto& row : result.log) {
    CHECK(row.game_id == 0);
    CHECK(row.game_size == 3);
  }
  for (const int games : result.metrics.games_per_frame) CHECK(games == 1);
}

TEST_CASE("deferred spawning waits for the entry to clear") {
  Scenario sc;
  sc.policy = Policy::kIdm;
  sc.sim_duration = 10.0;
  const PathPolynomial lane = line_path(0, 0, 0, 400.0);
  auto first = vehicle(1, lane, 2.0);  // crawls away from the entry
  first.v0 = 2.0;
  auto second = vehicle(2, lane, 10.0, 0.5);
  second.v0 = 10.0;
  sc.vehicles = {first, second};

  sc.defer_spawn = false;
  const SimResult eager = decnash::run(sc);
  sc.defer_spawn = true;
  const SimResult deferred = decnash::run(sc);

  const auto first_time = [](const SimResult& result, int id) {
    for (const auto& row : result.log) {
      if (row.vehicle_id == id) return row.time;
    }
    return -1.0;
  };
  CHECK(first_time(eager, 2) == doctest::Approx(0.5));
  // The entry clears once vehicle 1 has covered r_safe = 3 m, i.e. t = 1.5 s.
  CHECK(first_time(deferred, 2) == doctest::Approx(1.5).epsilon(0.1));
}

TEST_CASE("spawn jitter reshuffles entries per seed, reproducibly") {
  Scenario sc;
  sc.policy = Policy::kIdm;
  sc.sim_duration = 8.0;
  sc.spawn_jitter = 3.0;
  sc.vehicles = {vehicle(1, line_path(0, 0, 0, 400.0), 10.0),
                 vehicle(2, line_path(0, 50, 0, 400.0), 10.0)};

  sc.seed = 1;
  const SimResult run_a = decnash::run(sc);
  const SimResult run_a2 = decnash::run(sc);
  sc.seed = 2;
  const SimResult run_b = decnash::run(sc);

  CHECK(logs_equal(run_a.log, run_a2.log));
  CHECK_FALSE(logs_equal(run_a.log, run_b.log));
}

TEST_CASE("solver failures are counted and the run continues") {
  // Start the crossing vehicles close enough to see each other from frame 0,
  // so their two-player game immediately exceeds the player cap.
  Scenario sc;
  sc.sim_duration = 2.0;
  sc.solver.max_players = 1;
  auto first = vehicle(1, line_path(-12, 0, 0), 8.0);
  auto second = vehicle(2, line_path(0, -12, std::numbers::pi / 2), 8.0);
  first.v0 = 8.0;
  second.v0 = 7.5;
  sc.vehicles = {first, second};
  const SimResult result = decnash::run(sc);
  CHECK(result.metrics.solver_failures > 0);
  CHECK(result.metrics.players_per_frame.size() == 20);
  CHECK(!by_frame(result.log).rbegin()->second.empty());
}

TEST_CASE("the snapshot captures the largest game") {
  const SimResult result = decnash::run(crossing_scenario());
  CHECK(result.snapshot.game_size == 2);
  CHECK(result.snapshot.time >= 0.0);
  REQUIRE(result.snapshot.vehicles.size() == 2);
  for (const auto& plan : result.snapshot.vehicles) {
    CHECK(plan.controlled);
    CHECK(plan.x.size() == 21);  // horizon steps + 1
    CHECK(plan.v.size() == 21);
  }
}

TEST_CASE("summarize averages run metrics") {
  MetricsReport one;
  one.duration = 100.0;
  one.collision_events = 3;
  one.collisions_per_100s = 3.0;
  one.mean_speed_shortfall = 2.0;
  one.max_players_per_game = 4;
  one.players_per_frame = {1, 4};
  one.active_per_frame = {1, 4};
  one.policy_gen_time = {0.02, 0.04};
  one.solver_failures = 1;

  const auto single = decnash::summarize({one});
  CHECK(single.runs == 1);
  CHECK(single.collisions_per_100s == 3.0);
  CHECK(single.mean_speed_shortfall == 2.0);
  CHECK(single.max_players_per_game == 4.0);
  CHECK(single.mean_policy_gen_time == doctest::Approx(0.03));
  CHECK(single.solver_failures == 1.0);

  MetricsReport two = one;
  two.collisions_per_100s = 5.0;
  two.mean_speed_shortfall = 4.0;
  two.max_players_per_game = 6;
  two.policy_gen_time = {0.10, 0.10};
  two.solver_failures = 3;
  // A frame with no vehicles must not dilute the timing mean.
  two.players_per_frame = {1, 4, 0};
  two.active_per_frame = {1, 4, 0};
  two.policy_gen_time = {0.10, 0.10, 0.0};

  const auto mean = decnash::summarize({one, two});
  CHECK(mean.runs == 2);
  CHECK(mean.collisions_per_100s == 4.0);
  CHECK(mean.mean_speed_shortfall == 3.0);
  CHECK(mean.max_players_per_game == 5.0);
  CHECK(mean.mean_policy_gen_time == doctest::Approx(0.065));
  CHECK(mean.solver_failures == 2.0);

  CHECK_THROWS_AS(decnash::summarize({}), std::invalid_argument);
}

TEST_CASE("scenario invariants are validated before running") {
  Scenario sc;
  sc.plan_horizon = 4.1;
  CHECK_THROWS_AS(decnash::validate(sc), std::invalid_argument);
  sc = Scenario{};
  sc.sim_dt = 0.0;
  CHECK_THROWS_AS(decnash::validate(sc), std::invalid_argument);
  sc = Scenario{};
  sc.vehicles = {vehicle(1, line_path(0, 0, 0), 8.0), vehicle(1, line_path(0, 9, 0), 8.0)};
  CHECK_THROWS_AS(decnash::validate(sc), std::invalid_argument);
  sc = Scenario{};
  sc.vehicles = {vehicle(2, line_path(0, 0, 0), 8.0)};
  sc.vehicles[0].v0 = -1.0;
  CHECK_THROWS_AS(decnash::validate(sc), std::invalid_argument);
}

}  // TEST_SUITE
