// Command-line front end: path fitting from waypoint CSVs, single simulation
// runs with optional artifact dumps, and three-way policy comparisons.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decnash/errors.hpp"
#include "decnash/scenario_io.hpp"
#include "decnash/simulation.hpp"

namespace fs = std::filesystem;

namespace {

// DECNASH_THREADS caps how many component games are solved concurrently per
// frame; unset or 0 means sequential, which keeps timing runs reproducible.
int env_threads() {
  const char* raw = std::getenv("DECNASH_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || value < 0) {
    throw std::runtime_error("DECNASH_THREADS must be a non-negative integer, got '" +
                             std::string(raw) + "'");
  }
  return static_cast<int>(value);
}

void write_file(const fs::path& where, const std::string& content) {
  std::ofstream out(where, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + where.string());
  out << content;
}

// ---------------------------------------------------------------------------
// SVG figures. Hand-rolled polyline plots: a viewport, axes with min/max
// labels, and one colored series per vehicle.

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr double kMargin = 52.0;

struct Bounds {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  void include(double x, double y) {
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
  void pad(double fraction) {
    const double dx = std::max(1e-6, x_max - x_min) * fraction;
    const double dy = std::max(1e-6, y_max - y_min) * fraction;
    x_min -= dx;
    x_max += dx;
    y_min -= dy;
    y_max += dy;
  }
};

Bounds bounds_of(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& series) {
  Bounds b;
  bool first = true;
  for (const auto& [xs, ys] : series) {
    for (size_t k = 0; k < xs.size(); ++k) {
      if (first) {
        b = Bounds{xs[k], xs[k], ys[k], ys[k]};
        first = false;
      } else {
        b.include(xs[k], ys[k]);
      }
    }
  }
  b.pad(0.08);
  return b;
}

std::string fmt(double value) {
  std::ostringstream out;
  out << std::setprecision(4) << value;
  return out.str();
}

// Shared scaffolding: series polylines inside an axes box with corner labels.
// `equal_aspect` keeps meters square for the bird's-eye view.
std::string svg_figure(const std::string& title, const std::string& x_label,
                       const std::string& y_label,
                       const std::vector<std::pair<std::vector<double>, std::vector<double>>>& series,
                       const std::vector<std::string>& names,
                       const std::vector<bool>& dashed, bool equal_aspect) {
  Bounds b = bounds_of(series);
  if (equal_aspect) {
    const double span = std::max(b.x_max - b.x_min, b.y_max - b.y_min);
    const double cx = 0.5 * (b.x_min + b.x_max), cy = 0.5 * (b.y_min + b.y_max);
    b = Bounds{cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2};
  }
  const double plot_w = kWidth - 2 * kMargin;
  const double plot_h = kHeight - 2 * kMargin;
  const auto px = [&](double x) { return kMargin + (x - b.x_min) / (b.x_max - b.x_min) * plot_w; };
  const auto py = [&](double y) { return kHeight - kMargin - (y - b.y_min) / (b.y_max - b.y_min) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 16 " << kHeight / 2 << ")\">" << y_label << "</text>\n";
  // Corner tick labels are enough to read scales off the figure.
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(b.x_min) << "</text>\n";
  out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(b.x_max)
      << "</text>\n";
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kHeight - kMargin
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(b.y_min)
      << "</text>\n";
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin + 4
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(b.y_max)
      << "</text>\n";

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& [xs, ys] = series[k];
    if (xs.empty()) continue;
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (dashed[k]) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (size_t i = 0; i < xs.size(); ++i) {
      out << fmt(px(xs[i])) << ',' << fmt(py(ys[i])) << ' ';
    }
    out << "\"/>\n";
    out << "<circle cx=\"" << fmt(px(xs[0])) << "\" cy=\"" << fmt(py(ys[0]))
        << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(px(xs[0]) + 6) << "\" y=\"" << fmt(py(ys[0]) - 6)
        << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << color << "\">"
        << names[k] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_plot_files(const fs::path& out_dir, const decnash::PlanSnapshot& snapshot,
                      double plan_dt) {
  if (snapshot.game_size <= 0) {
    std::cout << "no game was recorded, skipping plots\n";
    return;
  }
  std::vector<std::pair<std::vector<double>, std::vector<double>>> plan, speed;
  std::vector<std::string> names;
  std::vector<bool> dashed;
  for (const auto& veh : snapshot.vehicles) {
    std::vector<double> times(veh.v.size());
    for (size_t k = 0; k < times.size(); ++k) times[k] = snapshot.time + k * plan_dt;
    plan.emplace_back(veh.x, veh.y);
    speed.emplace_back(times, veh.v);
    names.push_back((veh.controlled ? "vehicle " : "observed ") + std::to_string(veh.id));
    dashed.push_back(!veh.controlled);
  }
  const std::string when = " at t = " + fmt(snapshot.time) + " s";
  write_file(out_dir / "plan_snapshot.svg",
             svg_figure("Planned trajectories" + when, "x [m]", "y [m]", plan, names, dashed,
                        true));
  write_file(out_dir / "velocity_profiles.svg",
             svg_figure("Planned velocity profiles" + when, "time [s]", "v [m/s]", speed,
                        names, dashed, false));
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_fit(const std::string& in, int degree, const std::string& out) {
  const std::vector<Eigen::Vector2d> waypoints = decnash::load_waypoints_csv(in);
  decnash::FitDiagnostics diag;
  const decnash::PathPolynomial path = decnash::fit_path(waypoints, degree, &diag);
  write_file(out, decnash::path_to_json(path));
  std::cout << "fit " << waypoints.size() << " waypoints with degree " << degree << '\n'
            << "  rms residual:  " << diag.rms_residual << " m\n"
            << "  max residual:  " << diag.max_residual << " m\n"
            << "  condition est: " << diag.condition << '\n'
            << "  arc length:    " << path.s_max << " m\n"
            << "wrote " << out << '\n';
  return 0;
}

int cmd_run(const std::string& scenario_file, const std::optional<std::string>& policy,
            const std::optional<uint64_t>& seed, const std::string& out_dir, bool plots,
            bool dump_graphs, bool dump_trace) {
  decnash::Scenario scenario = decnash::load_scenario(scenario_file);
  if (policy) scenario.policy = decnash::policy_from_name(*policy);
  if (seed) scenario.seed = *seed;

  fs::create_directories(out_dir);
  // Echo the post-override configuration so the run can be reproduced from its
  // own output directory.
  write_file(fs::path(out_dir) / "scenario.json", decnash::scenario_to_json(scenario));

  std::ostringstream graphs, trace;
  graphs << "time,observer,observed,same_component\n";
  trace << "time,game,outer,inner,residual,violation,step\n";
  decnash::RunHooks hooks;
  if (dump_graphs) {
    hooks.on_graph = [&](double time, const decnash::InteractionGraph& graph,
                         const decnash::SccDecomposition& scc) {
      std::map<int, size_t> component_of;
      for (size_t c = 0; c < scc.components.size(); ++c) {
        for (const int id : scc.components[c]) component_of[id] = c;
      }
      for (const auto& [from, to] : graph.edges) {
        graphs << time << ',' << from << ',' << to << ','
               << (component_of.at(from) == component_of.at(to) ? 1 : 0) << '\n';
      }
    };
  }
  if (dump_trace) {
    hooks.on_trace = [&](double time, int game, const std::vector<decnash::TraceRow>& rows) {
      for (const auto& row : rows) {
        trace << time << ',' << game << ',' << row.outer << ',' << row.inner << ','
              << row.residual_norm << ',' << row.violation << ',' << row.step_length << '\n';
      }
    };
  }

  const decnash::SimResult result = decnash::run(scenario, env_threads(), &hooks);

  std::ostringstream trajectory, metrics;
  decnash::write_trajectory_csv(trajectory, result.log);
  decnash::write_metrics_csv(metrics, result.metrics);
  write_file(fs::path(out_dir) / "trajectory.csv", trajectory.str());
  write_file(fs::path(out_dir) / "metrics.csv", metrics.str());
  if (dump_graphs) write_file(fs::path(out_dir) / "graphs.csv", graphs.str());
  if (dump_trace) write_file(fs::path(out_dir) / "solver_trace.csv", trace.str());
  if (plots) write_plot_files(out_dir, result.snapshot, scenario.plan_dt);

  std::cout << decnash::policy_name(scenario.policy) << " run, seed " << scenario.seed << ": "
            << result.metrics.duration << " s simulated\n"
            << "  collision events:     " << result.metrics.collision_events << '\n'
            << "  mean speed shortfall: " << result.metrics.mean_speed_shortfall << " m/s\n"
            << "  max players per game: " << result.metrics.max_players_per_game << '\n'
            << "  solver failures:      " << result.metrics.solver_failures << '\n'
            << "artifacts in " << out_dir << '\n';
  return 0;  // a degraded-but-complete run is still a successful run
}

int cmd_compare(const std::string& scenario_file, int runs, const std::string& out_dir) {
  const decnash::Scenario base = decnash::load_scenario(scenario_file);
  fs::create_directories(out_dir);

  constexpr decnash::Policy kPolicies[] = {decnash::Policy::kIdm,
                                           decnash::Policy::kCentralized,
                                           decnash::Policy::kDecNash};
  std::ostringstream table;
  table << "policy,runs,collisions_per_100s,mean_speed_shortfall,max_players_per_game,"
           "mean_policy_gen_time,solver_failures\n";
  std::cout << std::left << std::setw(14) << "policy" << std::right << std::setw(12)
            << "coll/100s" << std::setw(16) << "shortfall[m/s]" << std::setw(13)
            << "max players" << std::setw(15) << "gen time [ms]" << '\n';

  for (const decnash::Policy policy : kPolicies) {
    std::vector<decnash::MetricsReport> reports;
    for (int k = 0; k < runs; ++k) {
      decnash::Scenario scenario = base;
      scenario.policy = policy;
      scenario.seed = base.seed + static_cast<uint64_t>(k);
      reports.push_back(decnash::run(scenario, env_threads()).metrics);
    }
    const decnash::MetricsSummary summary = decnash::summarize(reports);
    table << decnash::policy_name(policy) << ',' << runs << ',' << summary.collisions_per_100s
          << ',' << summary.mean_speed_shortfall << ',' << summary.max_players_per_game << ','
          << summary.mean_policy_gen_time << ',' << summary.solver_failures << '\n';
    std::cout << std::left << std::setw(14) << decnash::policy_name(policy) << std::right
              << std::fixed << std::setprecision(2) << std::setw(12)
              << summary.collisions_per_100s << std::setw(16) << summary.mean_speed_shortfall
              << std::setprecision(1) << std::setw(13) << summary.max_players_per_game
              << std::setprecision(3) << std::setw(15) << summary.mean_policy_gen_time * 1e3
              << '\n'
              << std::defaultfloat;
  }
  write_file(fs::path(out_dir) / "comparison.csv", table.str());
  std::cout << "wrote " << (fs::path(out_dir) / "comparison.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized game-theoretic traffic planner"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Fit a path polynomial to a waypoint CSV");
  std::string fit_in, fit_out;
  int fit_degree = 20;
  fit->add_option("--in", fit_in, "waypoint CSV (x,y per row)")->required();
  fit->add_option("--degree", fit_degree, "polynomial degree")->check(CLI::PositiveNumber);
  fit->add_option("--out", fit_out, "output path JSON")->required();

  auto* run = app.add_subcommand("run", "Simulate one scenario and write logs");
  std::string run_scenario, run_out = "out";
  std::optional<std::string> run_policy;
  std::optional<uint64_t> run_seed;
  bool run_plots = false, run_graphs = false, run_trace = false;
  run->add_option("--scenario", run_scenario, "scenario JSON file")->required();
  run->add_option("--policy", run_policy, "override: decnash, centralized, or idm");
  run->add_option("--seed", run_seed, "override the scenario seed");
  run->add_option("--out-dir", run_out, "artifact directory");
  run->add_flag("--plots", run_plots, "emit SVG snapshot and velocity figures");
  run->add_flag("--dump-graphs", run_graphs, "emit per-frame interaction edges CSV");
  run->add_flag("--dump-solver-trace", run_trace, "emit per-iteration solver CSV");

  auto* compare = app.add_subcommand("compare", "Run all three policies and tabulate metrics");
  std::string cmp_scenario, cmp_out = "out";
  int cmp_runs = 5;
  compare->add_option("--scenario", cmp_scenario, "scenario JSON file")->required();
  compare->add_option("--runs", cmp_runs, "runs per policy (seeds derived from the base seed)")
      ->check(CLI::PositiveNumber);
  compare->add_option("--out-dir", cmp_out, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(fit_in, fit_degree, fit_out);
    if (run->parsed()) {
      return cmd_run(run_scenario, run_policy, run_seed, run_out, run_plots, run_graphs,
                     run_trace);
    }
    return cmd_compare(cmp_scenario, cmp_runs, cmp_out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
