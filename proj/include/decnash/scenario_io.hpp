#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "decnash/path.hpp"
#include "decnash/simulation.hpp"

namespace decnash {

/// Strict scenario loader: unknown keys anywhere are errors, vehicle ids must
/// be unique, referenced waypoint files must exist, and every numeric
/// invariant is checked before the scenario is returned. Waypoint references
/// resolve relative to the scenario file's directory.
Scenario load_scenario(const std::filesystem::path& file);

/// Same parser on an in-memory document; `base_dir` anchors waypoint
/// references.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir);

/// Serializes a scenario with every field explicit and all paths inline, so
/// the output reloads to an identical scenario regardless of how the original
/// referenced its data. Used to echo the effective configuration of a run.
std::string scenario_to_json(const Scenario& scenario);

/// Waypoint CSV reader: two numeric columns per row (x, y in meters), with an
/// optional header row. Throws ScenarioError naming the offending line.
std::vector<Eigen::Vector2d> load_waypoints_csv(const std::filesystem::path& file);

/// Path (de)serialization in the scenario-file format:
/// {"coeffs_x": [...], "coeffs_y": [...], "s_scale": ..., "s_max": ...}.
std::string path_to_json(const PathPolynomial& path);
PathPolynomial path_from_json(const std::string& text);

/// Trajectory log as CSV (header + one row per vehicle per frame). Numbers are
/// printed in shortest round-trip form, so equal logs serialize byte-equal.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& log);

/// Run metrics as a two-column metric,value CSV. The mean policy-generation
/// time is averaged over frames that had at least one active vehicle.
void write_metrics_csv(std::ostream& out, const MetricsReport& metrics);

}  // namespace decnash
