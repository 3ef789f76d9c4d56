#include "decnash/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "decnash/errors.hpp"

namespace decnash {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw ScenarioError(message); }

// Strict schemas: every object is checked against the full list of keys it
// may carry, so typos fail loudly instead of silently falling back to
// defaults.
void expect_keys(const json& obj, const char* where,
                 std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(std::string(where) + " must be a JSON object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* key) {
      return item.key() == key;
    });
    if (!known) fail("unknown key '" + item.key() + "' in " + where);
  }
}

double as_number(const json& value, const std::string& what) {
  if (!value.is_number()) fail(what + " must be a number");
  return value.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const char* where) {
  if (!obj.contains(key)) return fallback;
  return as_number(obj.at(key), std::string(where) + "." + key);
}

int int_or(const json& obj, const char* key, int fallback, const char* where) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_number_integer()) {
    fail(std::string(where) + "." + key + " must be an integer");
  }
  return value.get<int>();
}

bool bool_or(const json& obj, const char* key, bool fallback, const char* where) {
  if (!obj.contains(key)) return fallback;
  const json& value = obj.at(key);
  if (!value.is_boolean()) fail(std::string(where) + "." + key + " must be a boolean");
  return value.get<bool>();
}

std::vector<double> as_number_array(const json& value, const std::string& what) {
  if (!value.is_array()) fail(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& item : value) out.push_back(as_number(item, what + " entry"));
  return out;
}

PathPolynomial path_from(const json& obj, const char* where) {
  expect_keys(obj, where, {"coeffs_x", "coeffs_y", "s_scale", "s_max"});
  for (const char* key : {"coeffs_x", "coeffs_y", "s_scale", "s_max"}) {
    if (!obj.contains(key)) fail(std::string(where) + " is missing '" + key + "'");
  }
  PathPolynomial path;
  path.coeffs_x = as_number_array(obj.at("coeffs_x"), std::string(where) + ".coeffs_x");
  path.coeffs_y = as_number_array(obj.at("coeffs_y"), std::string(where) + ".coeffs_y");
  path.s_scale = as_number(obj.at("s_scale"), std::string(where) + ".s_scale");
  path.s_max = as_number(obj.at("s_max"), std::string(where) + ".s_max");
  try {
    validate(path);
  } catch (const std::invalid_argument& err) {
    fail(std::string(where) + ": " + err.what());
  }
  return path;
}

json path_to(const PathPolynomial& path) {
  json obj;
  obj["coeffs_x"] = path.coeffs_x;
  obj["coeffs_y"] = path.coeffs_y;
  obj["s_scale"] = path.s_scale;
  obj["s_max"] = path.s_max;
  return obj;
}

Policy policy_from(const std::string& name) {
  try {
    return policy_from_name(name);
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  }
}

constexpr double kDegree = std::numbers::pi / 180.0;

void read_sim(const json& obj, Scenario& scenario) {
  expect_keys(obj, "sim",
              {"duration", "sim_dt", "plan_dt", "plan_horizon", "r_safe", "plan_margin",
               "seed", "policy", "spawn_jitter", "defer_spawn"});
  scenario.sim_duration = number_or(obj, "duration", scenario.sim_duration, "sim");
  scenario.sim_dt = number_or(obj, "sim_dt", scenario.sim_dt, "sim");
  scenario.plan_dt = number_or(obj, "plan_dt", scenario.plan_dt, "sim");
  scenario.plan_horizon = number_or(obj, "plan_horizon", scenario.plan_horizon, "sim");
  scenario.r_safe = number_or(obj, "r_safe", scenario.r_safe, "sim");
  scenario.plan_margin = number_or(obj, "plan_margin", scenario.plan_margin, "sim");
  scenario.spawn_jitter = number_or(obj, "spawn_jitter", scenario.spawn_jitter, "sim");
  scenario.defer_spawn = bool_or(obj, "defer_spawn", scenario.defer_spawn, "sim");
  if (obj.contains("seed")) {
    const json& seed = obj.at("seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) {
      fail("sim.seed must be a non-negative integer");
    }
    scenario.seed = seed.get<uint64_t>();
  }
  if (obj.contains("policy")) {
    const json& policy = obj.at("policy");
    if (!policy.is_string()) fail("sim.policy must be a string");
    scenario.policy = policy_from(policy.get<std::string>());
  }
}

void read_observation(const json& obj, ObservationModel& model) {
  expect_keys(obj, "observation", {"range", "half_angle_deg"});
  model.range = number_or(obj, "range", model.range, "observation");
  model.half_angle =
      number_or(obj, "half_angle_deg", model.half_angle / kDegree, "observation") * kDegree;
}

void read_idm(const json& obj, IdmParams& params) {
  expect_keys(obj, "idm",
              {"d_min", "tau", "a_max", "b_pref", "b_emergency", "follow_half_angle_deg"});
  params.d_min = number_or(obj, "d_min", params.d_min, "idm");
  params.tau = number_or(obj, "tau", params.tau, "idm");
  params.a_max = number_or(obj, "a_max", params.a_max, "idm");
  params.b_pref = number_or(obj, "b_pref", params.b_pref, "idm");
  params.b_emergency = number_or(obj, "b_emergency", params.b_emergency, "idm");
  params.follow_half_angle =
      number_or(obj, "follow_half_angle_deg", params.follow_half_angle / kDegree, "idm") *
      kDegree;
}

void read_solver(const json& obj, SolverConfig& config) {
  expect_keys(obj, "solver",
              {"tol_stationarity", "tol_constraint", "max_outer", "max_inner", "rho_init",
               "rho_scale", "levenberg_init", "levenberg_max", "constraint_curvature",
               "max_players", "line_search"});
  config.tol_stationarity = number_or(obj, "tol_stationarity", config.tol_stationarity, "solver");
  config.tol_constraint = number_or(obj, "tol_constraint", config.tol_constraint, "solver");
  config.max_outer = int_or(obj, "max_outer", config.max_outer, "solver");
  config.max_inner = int_or(obj, "max_inner", config.max_inner, "solver");
  config.rho_init = number_or(obj, "rho_init", config.rho_init, "solver");
  config.rho_scale = number_or(obj, "rho_scale", config.rho_scale, "solver");
  config.levenberg_init = number_or(obj, "levenberg_init", config.levenberg_init, "solver");
  config.levenberg_max = number_or(obj, "levenberg_max", config.levenberg_max, "solver");
  config.constraint_curvature =
      bool_or(obj, "constraint_curvature", config.constraint_curvature, "solver");
  config.max_players = int_or(obj, "max_players", config.max_players, "solver");
  if (obj.contains("line_search")) {
    const json& ls = obj.at("line_search");
    expect_keys(ls, "solver.line_search", {"shrink", "min_step", "sufficient_decrease"});
    config.line_search.shrink =
        number_or(ls, "shrink", config.line_search.shrink, "solver.line_search");
    config.line_search.min_step =
        number_or(ls, "min_step", config.line_search.min_step, "solver.line_search");
    config.line_search.sufficient_decrease = number_or(
        ls, "sufficient_decrease", config.line_search.sufficient_decrease, "solver.line_search");
  }
}

SpawnEntry read_vehicle(const json& obj, const std::filesystem::path& base_dir,
                        size_t position) {
  const std::string where = "vehicles[" + std::to_string(position) + "]";
  expect_keys(obj, where.c_str(),
              {"id", "spawn_time", "v_target", "v0", "q", "r", "u_min", "u_max", "path",
               "waypoints_file", "fit_degree"});
  if (!obj.contains("id")) fail(where + " is missing 'id'");
  SpawnEntry entry;
  entry.id = int_or(obj, "id", -1, where.c_str());
  entry.params.spawn_time = number_or(obj, "spawn_time", 0.0, where.c_str());
  entry.params.v_target = number_or(obj, "v_target", entry.params.v_target, where.c_str());
  entry.params.q = number_or(obj, "q", entry.params.q, where.c_str());
  entry.params.r = number_or(obj, "r", entry.params.r, where.c_str());
  entry.params.u_min = number_or(obj, "u_min", entry.params.u_min, where.c_str());
  entry.params.u_max = number_or(obj, "u_max", entry.params.u_max, where.c_str());
  if (obj.contains("v0")) entry.v0 = as_number(obj.at("v0"), where + ".v0");

  const bool inline_path = obj.contains("path");
  const bool file_path = obj.contains("waypoints_file");
  if (inline_path == file_path) {
    fail(where + " needs exactly one of 'path' or 'waypoints_file'");
  }
  if (inline_path) {
    if (obj.contains("fit_degree")) {
      fail(where + ": 'fit_degree' only applies to 'waypoints_file'");
    }
    entry.params.path = path_from(obj.at("path"), (where + ".path").c_str());
  } else {
    const json& name = obj.at("waypoints_file");
    if (!name.is_string()) fail(where + ".waypoints_file must be a string");
    const std::filesystem::path file = base_dir / name.get<std::string>();
    const int degree = int_or(obj, "fit_degree", 20, where.c_str());
    const auto waypoints = load_waypoints_csv(file);
    try {
      entry.params.path = fit_path(waypoints, degree, nullptr);
    } catch (const std::exception& err) {
      fail(where + ": fitting '" + file.string() + "' failed: " + err.what());
    }
  }
  return entry;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    fail(std::string("scenario JSON: ") + err.what());
  }
  expect_keys(doc, "scenario", {"sim", "observation", "idm", "solver", "vehicles"});

  Scenario scenario;
  if (doc.contains("sim")) read_sim(doc.at("sim"), scenario);
  if (doc.contains("observation")) read_observation(doc.at("observation"), scenario.observation);
  if (doc.contains("idm")) read_idm(doc.at("idm"), scenario.idm);
  if (doc.contains("solver")) read_solver(doc.at("solver"), scenario.solver);
  if (doc.contains("vehicles")) {
    const json& vehicles = doc.at("vehicles");
    if (!vehicles.is_array()) fail("vehicles must be an array");
    for (size_t i = 0; i < vehicles.size(); ++i) {
      scenario.vehicles.push_back(read_vehicle(vehicles[i], base_dir, i));
    }
  }
  try {
    validate(scenario);
  } catch (const std::invalid_argument& err) {
    fail(std::string("scenario: ") + err.what());
  }
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("cannot open scenario file '" + file.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), file.parent_path());
}

std::string scenario_to_json(const Scenario& scenario) {
  json doc;
  json& sim = doc["sim"];
  sim["duration"] = scenario.sim_duration;
  sim["sim_dt"] = scenario.sim_dt;
  sim["plan_dt"] = scenario.plan_dt;
  sim["plan_horizon"] = scenario.plan_horizon;
  sim["r_safe"] = scenario.r_safe;
  sim["plan_margin"] = scenario.plan_margin;
  sim["seed"] = scenario.seed;
  sim["policy"] = policy_name(scenario.policy);
  sim["spawn_jitter"] = scenario.spawn_jitter;
  sim["defer_spawn"] = scenario.defer_spawn;

  json& observation = doc["observation"];
  observation["range"] = scenario.observation.range;
  observation["half_angle_deg"] = scenario.observation.half_angle / kDegree;

  json& idm = doc["idm"];
  idm["d_min"] = scenario.idm.d_min;
  idm["tau"] = scenario.idm.tau;
  idm["a_max"] = scenario.idm.a_max;
  idm["b_pref"] = scenario.idm.b_pref;
  idm["b_emergency"] = scenario.idm.b_emergency;
  idm["follow_half_angle_deg"] = scenario.idm.follow_half_angle / kDegree;

  json& solver = doc["solver"];
  solver["tol_stationarity"] = scenario.solver.tol_stationarity;
  solver["tol_constraint"] = scenario.solver.tol_constraint;
  solver["max_outer"] = scenario.solver.max_outer;
  solver["max_inner"] = scenario.solver.max_inner;
  solver["rho_init"] = scenario.solver.rho_init;
  solver["rho_scale"] = scenario.solver.rho_scale;
  solver["levenberg_init"] = scenario.solver.levenberg_init;
  solver["levenberg_max"] = scenario.solver.levenberg_max;
  solver["constraint_curvature"] = scenario.solver.constraint_curvature;
  solver["max_players"] = scenario.solver.max_players;
  json& line_search = solver["line_search"];
  line_search["shrink"] = scenario.solver.line_search.shrink;
  line_search["min_step"] = scenario.solver.line_search.min_step;
  line_search["sufficient_decrease"] = scenario.solver.line_search.sufficient_decrease;

  doc["vehicles"] = json::array();
  for (const auto& entry : scenario.vehicles) {
    json veh;
    veh["id"] = entry.id;
    veh["spawn_time"] = entry.params.spawn_time;
    veh["v_target"] = entry.params.v_target;
    if (entry.v0) veh["v0"] = *entry.v0;
    veh["q"] = entry.params.q;
    veh["r"] = entry.params.r;
    veh["u_min"] = entry.params.u_min;
    veh["u_max"] = entry.params.u_max;
    veh["path"] = path_to(entry.params.path);
    doc["vehicles"].push_back(std::move(veh));
  }
  return doc.dump(2) + "\n";
}

std::vector<Eigen::Vector2d> load_waypoints_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("cannot open waypoints file '" + file.string() + "'");
  std::vector<Eigen::Vector2d> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip blanks and a possible header row.
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double x, y;
    if (!(fields >> x >> y)) {
      if (line_no == 1 && points.empty()) continue;  // header row like "x,y"
      fail(file.string() + " line " + std::to_string(line_no) +
           ": expected two numeric fields");
    }
    std::string extra;
    if (fields >> extra) {
      fail(file.string() + " line " + std::to_string(line_no) + ": too many fields");
    }
    points.emplace_back(x, y);
  }
  if (points.empty()) fail(file.string() + ": no waypoints found");
  return points;
}

std::string path_to_json(const PathPolynomial& path) { return path_to(path).dump(2) + "\n"; }

PathPolynomial path_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    fail(std::string("path JSON: ") + err.what());
  }
  return path_from(doc, "path");
}

namespace {

// Shortest decimal form that parses back to the same double; keeps CSV output
// both exact and byte-stable across runs.
std::string num(double value) { return json(value).dump(); }

}  // namespace

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& log) {
  out << "time,vehicle_id,s,v,x,y,u,game_id,game_size\n";
  for (const auto& row : log) {
    out << num(row.time) << ',' << row.vehicle_id << ',' << num(row.s) << ',' << num(row.v)
        << ',' << num(row.x) << ',' << num(row.y) << ',' << num(row.u) << ',' << row.game_id
        << ',' << row.game_size << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const MetricsReport& metrics) {
  double time_sum = 0.0;
  int busy_frames = 0;
  for (size_t k = 0; k < metrics.policy_gen_time.size(); ++k) {
    if (metrics.active_per_frame[k] > 0) {
      time_sum += metrics.policy_gen_time[k];
      ++busy_frames;
    }
  }
  out << "metric,value\n";
  out << "duration," << num(metrics.duration) << '\n';
  out << "collision_events," << metrics.collision_events << '\n';
  out << "collisions_per_100s," << num(metrics.collisions_per_100s) << '\n';
  out << "mean_speed_shortfall," << num(metrics.mean_speed_shortfall) << '\n';
  out << "max_players_per_game," << metrics.max_players_per_game << '\n';
  out << "solver_failures," << metrics.solver_failures << '\n';
  out << "mean_policy_gen_time," << num(busy_frames > 0 ? time_sum / busy_frames : 0.0)
      << '\n';
}

}  // namespace decnash
