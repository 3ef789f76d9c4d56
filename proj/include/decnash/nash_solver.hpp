#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <optional>
#include <vector>

#include "decnash/game.hpp"

namespace decnash {

struct LineSearchConfig {
  double shrink = 0.5;
  double min_step = 1e-8;
  double sufficient_decrease = 1e-4;
};

struct SolverConfig {
  double tol_stationarity = 1e-6;
  double tol_constraint = 1e-6;
  int max_outer = 10;
  int max_inner = 50;
  double rho_init = 1.0;
  double rho_scale = 10.0;
  LineSearchConfig line_search;
  // Levenberg diagonal regularization ladder for near-singular Newton systems.
  double levenberg_init = 1e-6;
  double levenberg_max = 1e-2;
  // Include exact separation-constraint curvature in the Newton matrix.
  // Off by default: the separation constraint is concave, so its curvature
  // term injects negative diagonal that can trap the iterates near vehicle
  // coincidence; the Gauss-Newton approximation stays positive semidefinite
  // and escapes.  Enable for faster boundary tracking on well-separated
  // warm starts.
  bool constraint_curvature = false;
  // Reject games wider than this many controlled players (0 = no limit); the
  // cold-start plan is returned unconverged instead of solving.
  int max_players = 0;
};

void validate(const SolverConfig& config);

struct TraceRow {
  int outer = 0;
  int inner = 0;  // -1 marks the end-of-outer summary row
  double residual_norm = 0.0;
  double violation = 0.0;
  double step_length = 0.0;
};

struct NashSolution {
  JointPlan plan;
  bool converged = false;
  double stationarity_norm = 0.0;
  double max_violation = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  double wall_time = 0.0;  // seconds
};

// Finds a local open-loop generalized Nash equilibrium: Newton root-finding
// on the stacked per-player stationarity conditions of an augmented
// Lagrangian, with shared inequality multipliers across players. Observed
// vehicles are substituted, not solved for. Never throws on non-convergence;
// the best iterate comes back with converged=false.
NashSolution solve(const GameSpec& spec, const SolverConfig& config,
                   const std::optional<JointPlan>& warm_start = std::nullopt,
                   std::vector<TraceRow>* trace = nullptr);

struct EquilibriumReport {
  double max_improvement = 0.0;              // best unilateral cost decrease found
  std::vector<double> per_player;            // best decrease per player
  int feasible_probes = 0;
};

// Falsification probe of the equilibrium property: random feasible
// perturbations of one player's controls at a time must not lower that
// player's cost (beyond second-order radius effects).
EquilibriumReport check_equilibrium(const JointPlan& plan, const GameSpec& spec, int n_probes,
                                    double radius, uint64_t seed = 0);

// --- Internals exposed for diagnostics and derivative tests ---------------
//
// The solver's unknown vector stacks, per controlled player, the packed
// decision variables [u_0..u_{T-1}, s_1, v_1, ..., s_T, v_T], followed by all
// players' dynamics multipliers (2T each).

int unknown_count(const GameSpec& spec);

// Packs a plan into the z-part of an unknown vector (multipliers zeroed).
Eigen::VectorXd pack_plan(const GameSpec& spec, const JointPlan& plan);

// Reads controls and trajectories back out of an unknown vector; positions
// are refreshed through the paths with linear extension.
JointPlan unpack_plan(const GameSpec& spec, const Eigen::VectorXd& w);

// Stacked residual [per-player stationarity; per-player dynamics defects]
// of the augmented Lagrangian at unknowns w with inequality multipliers
// lambda and penalty rho.
Eigen::VectorXd al_residual(const GameSpec& spec, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& lambda, double rho,
                            const SolverConfig& config);

Eigen::SparseMatrix<double> al_jacobian(const GameSpec& spec, const Eigen::VectorXd& w,
                                        const Eigen::VectorXd& lambda, double rho,
                                        const SolverConfig& config);

}  // namespace decnash
