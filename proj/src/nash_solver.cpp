#include "decnash/nash_solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "decnash/dynamics.hpp"
#include "decnash/path.hpp"
#include "decnash/rng.hpp"

namespace decnash {

namespace {

// Index helpers over the unknown vector: per player i the packed block
// [u_0..u_{T-1}, s_1, v_1, ..., s_T, v_T], then all dynamics multipliers.
struct Layout {
  int T;
  int nc;
  int nz;  // 3T * nc
  int n;   // nz + 2T * nc

  explicit Layout(const GameSpec& spec)
      : T(spec.horizon_steps),
        nc(spec.n_controlled()),
        nz(3 * spec.horizon_steps * spec.n_controlled()),
        n(5 * spec.horizon_steps * spec.n_controlled()) {}

  int zu(int i, int t) const { return i * 3 * T + t; }            // t in 0..T-1
  int zs(int i, int t) const { return i * 3 * T + T + 2 * (t - 1); }      // t in 1..T
  int zv(int i, int t) const { return i * 3 * T + T + 2 * (t - 1) + 1; }  // t in 1..T
  int mu(int i, int row) const { return nz + i * 2 * T + row; }   // row in 0..2T-1
};

enum class IneqKind { kUpperBound, kLowerBound, kSpeed, kCollision };

struct IneqMeta {
  IneqKind kind;
  int player = -1;  // controlled player for bounds/speed
  int t = 0;
  int term = -1;  // index into collision_terms for kCollision
};

// Mirrors the residual ordering of constraint_residuals exactly.
std::vector<IneqMeta> inequality_layout(const GameSpec& spec) {
  const int T = spec.horizon_steps;
  std::vector<IneqMeta> meta;
  for (int i = 0; i < spec.n_controlled(); ++i) {
    for (int t = 0; t < T; ++t) {
      meta.push_back({IneqKind::kUpperBound, i, t, -1});
      meta.push_back({IneqKind::kLowerBound, i, t, -1});
    }
    for (int t = 1; t <= T; ++t) {
      meta.push_back({IneqKind::kSpeed, i, t, -1});
    }
  }
  const int n_pairs = static_cast<int>(collision_pairs(spec).size());
  for (int m = 0; m < n_pairs * T; ++m) {
    meta.push_back({IneqKind::kCollision, -1, 0, m});
  }
  return meta;
}

double max_violation_of(const ConstraintResiduals& res) {
  double viol = 0.0;
  for (double eq : res.equalities) viol = std::max(viol, std::abs(eq));
  for (double ineq : res.inequalities) viol = std::max(viol, ineq);
  return std::max(viol, 0.0);
}

// Levenberg ladder: factor the Newton matrix, retrying with growing diagonal
// shifts until the solve produces a finite step.
std::optional<Eigen::VectorXd> solve_newton_system(const Eigen::SparseMatrix<double>& jac,
                                                   const Eigen::VectorXd& rhs,
                                                   const SolverConfig& config) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double shift = 0.0;
  while (true) {
    Eigen::SparseMatrix<double> m = jac;
    if (shift > 0.0) {
      for (int k = 0; k < m.rows(); ++k) m.coeffRef(k, k) += shift;
    }
    lu.compute(m);
    if (lu.info() == Eigen::Success) {
      Eigen::VectorXd step = lu.solve(rhs);
      if (step.allFinite()) return step;
    }
    if (shift == 0.0) {
      shift = config.levenberg_init;
    } else if (shift < config.levenberg_max) {
      shift = std::min(shift * 10.0, config.levenberg_max);
    } else {
      return std::nullopt;
    }
  }
}

std::vector<std::vector<double>> zero_controls(const GameSpec& spec) {
  return std::vector<std::vector<double>>(
      spec.controlled.size(), std::vector<double>(spec.horizon_steps, 0.0));
}

}  // namespace

void validate(const SolverConfig& config) {
  if (!(config.tol_stationarity > 0.0) || !(config.tol_constraint > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (config.max_outer < 1 || config.max_inner < 1) {
    throw std::invalid_argument("iteration limits must be at least 1");
  }
  if (!(config.rho_init > 0.0) || !(config.rho_scale > 1.0)) {
    throw std::invalid_argument("penalty requires rho_init > 0 and rho_scale > 1");
  }
  if (!(config.line_search.shrink > 0.0) || config.line_search.shrink >= 1.0 ||
      !(config.line_search.min_step > 0.0) || !(config.line_search.sufficient_decrease > 0.0)) {
    throw std::invalid_argument("malformed line-search parameters");
  }
  if (!(config.levenberg_init > 0.0) || config.levenberg_max < config.levenberg_init) {
    throw std::invalid_argument("malformed regularization ladder");
  }
  if (config.max_players < 0) {
    throw std::invalid_argument("max_players must be non-negative");
  }
}

int unknown_count(const GameSpec& spec) { return Layout(spec).n; }

Eigen::VectorXd pack_plan(const GameSpec& spec, const JointPlan& plan) {
  const Layout lay(spec);
  if (plan.controls.size() != static_cast<size_t>(lay.nc) ||
      plan.trajectories.size() < static_cast<size_t>(lay.nc)) {
    throw std::invalid_argument("plan does not match the game dimensions");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(lay.n);
  for (int i = 0; i < lay.nc; ++i) {
    if (plan.controls[i].size() != static_cast<size_t>(lay.T) ||
        plan.trajectories[i].size() != static_cast<size_t>(lay.T) + 1) {
      throw std::invalid_argument("plan does not match the game horizon");
    }
    for (int t = 0; t < lay.T; ++t) w[lay.zu(i, t)] = plan.controls[i][t];
    for (int t = 1; t <= lay.T; ++t) {
      w[lay.zs(i, t)] = plan.trajectories[i][t].s;
      w[lay.zv(i, t)] = plan.trajectories[i][t].v;
    }
  }
  return w;
}

JointPlan unpack_plan(const GameSpec& spec, const Eigen::VectorXd& w) {
  const Layout lay(spec);
  if (w.size() != lay.n) {
    throw std::invalid_argument("unknown vector does not match the game dimensions");
  }
  JointPlan plan;
  plan.controls.assign(lay.nc, std::vector<double>(lay.T));
  plan.trajectories.resize(spec.n_total());
  for (int i = 0; i < lay.nc; ++i) {
    for (int t = 0; t < lay.T; ++t) plan.controls[i][t] = w[lay.zu(i, t)];
    auto& traj = plan.trajectories[i];
    traj.resize(lay.T + 1);
    traj[0] = spec.controlled[i].state;
    for (int t = 1; t <= lay.T; ++t) {
      traj[t] = spec.controlled[i].state;
      traj[t].s = w[lay.zs(i, t)];
      traj[t].v = w[lay.zv(i, t)];
      const PathPoint pt = eval_extended(spec.controlled[i].params.path, traj[t].s);
      traj[t].p_x = pt.x;
      traj[t].p_y = pt.y;
    }
  }
  // Observed vehicles move on their pinned forecasts.
  for (size_t o = 0; o < spec.observed.size(); ++o) {
    const auto& veh = spec.observed[o];
    auto& traj = plan.trajectories[lay.nc + o];
    traj.resize(lay.T + 1);
    traj[0] = veh.state;
    double s = veh.state.s, v = veh.state.v;
    for (int t = 0; t < lay.T; ++t) {
      step_linear(s, v, veh.forecast[t], spec.dt);
      traj[t + 1] = veh.state;
      traj[t + 1].s = s;
      traj[t + 1].v = v;
      const PathPoint pt = eval_extended(veh.params.path, s);
      traj[t + 1].p_x = pt.x;
      traj[t + 1].p_y = pt.y;
    }
  }
  return plan;
}

Eigen::VectorXd al_residual(const GameSpec& spec, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& lambda, double rho,
                            const SolverConfig& config) {
  (void)config;
  const Layout lay(spec);
  const JointPlan plan = unpack_plan(spec, w);
  const ConstraintResiduals res = constraint_residuals(plan, spec);
  const auto terms = collision_terms(plan, spec);
  const auto meta = inequality_layout(spec);
  if (lambda.size() != static_cast<Eigen::Index>(meta.size())) {
    throw std::invalid_argument("multiplier vector does not match the inequality count");
  }

  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n);

  for (int i = 0; i < lay.nc; ++i) {
    const auto& params = spec.controlled[i].params;
    // Objective gradient.
    for (int t = 0; t < lay.T; ++t) {
      g[lay.zu(i, t)] += 2.0 * params.r * plan.controls[i][t];
      g[lay.zv(i, t + 1)] += 2.0 * params.q * (plan.trajectories[i][t + 1].v - params.v_target);
    }
    // Dynamics multiplier terms and the defect rows themselves.
    const double dt = spec.dt;
    for (int t = 0; t < lay.T; ++t) {
      const double mu_s = w[lay.mu(i, 2 * t)];
      const double mu_v = w[lay.mu(i, 2 * t + 1)];
      g[lay.zs(i, t + 1)] += mu_s;
      g[lay.zv(i, t + 1)] += mu_v;
      g[lay.zu(i, t)] += -0.5 * dt * dt * mu_s - dt * mu_v;
      if (t >= 1) {
        g[lay.zs(i, t)] -= mu_s;
        g[lay.zv(i, t)] -= dt * mu_s + mu_v;
      }
      g[lay.mu(i, 2 * t)] = res.equalities[2 * lay.T * i + 2 * t];
      g[lay.mu(i, 2 * t + 1)] = res.equalities[2 * lay.T * i + 2 * t + 1];
    }
  }

  // Augmented-Lagrangian inequality terms, shared multipliers across players.
  for (size_t k = 0; k < meta.size(); ++k) {
    const double a = std::max(0.0, lambda[k] + rho * res.inequalities[k]);
    if (a <= 0.0) continue;
    switch (meta[k].kind) {
      case IneqKind::kUpperBound:
        g[lay.zu(meta[k].player, meta[k].t)] += a;
        break;
      case IneqKind::kLowerBound:
        g[lay.zu(meta[k].player, meta[k].t)] -= a;
        break;
      case IneqKind::kSpeed:
        g[lay.zv(meta[k].player, meta[k].t)] -= a;
        break;
      case IneqKind::kCollision: {
        const auto& term = terms[meta[k].term];
        if (term.a < lay.nc) g[lay.zs(term.a, term.t)] += a * term.dg_dsa;
        if (term.b < lay.nc) g[lay.zs(term.b, term.t)] += a * term.dg_dsb;
        break;
      }
    }
  }
  return g;
}

Eigen::SparseMatrix<double> al_jacobian(const GameSpec& spec, const Eigen::VectorXd& w,
                                        const Eigen::VectorXd& lambda, double rho,
                                        const SolverConfig& config) {
  const Layout lay(spec);
  const JointPlan plan = unpack_plan(spec, w);
  const ConstraintResiduals res = constraint_residuals(plan, spec);
  const auto terms = collision_terms(plan, spec);
  const auto meta = inequality_layout(spec);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(lay.n) * 8);

  const double dt = spec.dt;
  for (int i = 0; i < lay.nc; ++i) {
    const auto& params = spec.controlled[i].params;
    for (int t = 0; t < lay.T; ++t) {
      // Objective Hessian.
      trip.emplace_back(lay.zu(i, t), lay.zu(i, t), 2.0 * params.r);
      trip.emplace_back(lay.zv(i, t + 1), lay.zv(i, t + 1), 2.0 * params.q);

      // Dynamics rows and their transposes in the stationarity block.
      const int row_s = lay.mu(i, 2 * t);
      const int row_v = lay.mu(i, 2 * t + 1);
      auto both = [&trip](int row, int col, double val) {
        trip.emplace_back(row, col, val);
        trip.emplace_back(col, row, val);
      };
      both(row_s, lay.zs(i, t + 1), 1.0);
      both(row_s, lay.zu(i, t), -0.5 * dt * dt);
      both(row_v, lay.zv(i, t + 1), 1.0);
      both(row_v, lay.zu(i, t), -dt);
      if (t >= 1) {
        both(row_s, lay.zs(i, t), -1.0);
        both(row_s, lay.zv(i, t), -dt);
        both(row_v, lay.zv(i, t), -1.0);
      }
    }
  }

  for (size_t k = 0; k < meta.size(); ++k) {
    if (lambda[k] + rho * res.inequalities[k] <= 0.0) continue;
    const double a = lambda[k] + rho * res.inequalities[k];
    // Touched decision variables and the constraint gradient there.
    int var[2] = {-1, -1};
    double grad[2] = {0.0, 0.0};
    int n_var = 0;
    switch (meta[k].kind) {
      case IneqKind::kUpperBound:
        var[n_var] = lay.zu(meta[k].player, meta[k].t);
        grad[n_var++] = 1.0;
        break;
      case IneqKind::kLowerBound:
        var[n_var] = lay.zu(meta[k].player, meta[k].t);
        grad[n_var++] = -1.0;
        break;
      case IneqKind::kSpeed:
        var[n_var] = lay.zv(meta[k].player, meta[k].t);
        grad[n_var++] = -1.0;
        break;
      case IneqKind::kCollision: {
        const auto& term = terms[meta[k].term];
        if (term.a < lay.nc) {
          var[n_var] = lay.zs(term.a, term.t);
          grad[n_var++] = term.dg_dsa;
        }
        if (term.b < lay.nc) {
          var[n_var] = lay.zs(term.b, term.t);
          grad[n_var++] = term.dg_dsb;
        }
        if (config.constraint_curvature) {
          if (term.a < lay.nc) {
            trip.emplace_back(lay.zs(term.a, term.t), lay.zs(term.a, term.t),
                              a * term.d2g_dsasa);
          }
          if (term.b < lay.nc) {
            trip.emplace_back(lay.zs(term.b, term.t), lay.zs(term.b, term.t),
                              a * term.d2g_dsbsb);
          }
          if (term.a < lay.nc && term.b < lay.nc) {
            trip.emplace_back(lay.zs(term.a, term.t), lay.zs(term.b, term.t),
                              a * term.d2g_dsasb);
            trip.emplace_back(lay.zs(term.b, term.t), lay.zs(term.a, term.t),
                              a * term.d2g_dsasb);
          }
        }
        break;
      }
    }
    for (int p = 0; p < n_var; ++p) {
      for (int q = 0; q < n_var; ++q) {
        trip.emplace_back(var[p], var[q], rho * grad[p] * grad[q]);
      }
    }
  }

  Eigen::SparseMatrix<double> jac(lay.n, lay.n);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

NashSolution solve(const GameSpec& spec, const SolverConfig& config,
                   const std::optional<JointPlan>& warm_start, std::vector<TraceRow>* trace) {
  const auto t_start = std::chrono::steady_clock::now();
  validate(spec);
  validate(config);
  const Layout lay(spec);
  const auto meta = inequality_layout(spec);

  auto finish = [&](NashSolution sol) {
    sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
  };

  if (config.max_players > 0 && lay.nc > config.max_players) {
    // Too wide to solve under this configuration: hand back the constant-
    // velocity plan and let the caller see the non-convergence.
    NashSolution sol;
    sol.plan = rollout(spec, zero_controls(spec));
    sol.converged = false;
    sol.max_violation = max_violation_of(constraint_residuals(sol.plan, spec));
    return finish(sol);
  }

  Eigen::VectorXd w = warm_start.has_value() ? pack_plan(spec, *warm_start)
                                             : pack_plan(spec, rollout(spec, zero_controls(spec)));
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(meta.size()));
  double rho = config.rho_init;

  NashSolution sol;
  double prev_viol = std::numeric_limits<double>::infinity();
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w = w;
  double best_resid = 0.0, best_viol = 0.0;

  for (int outer = 0; outer < config.max_outer; ++outer) {
    double alpha_last = 0.0;
    for (int inner = 0; inner < config.max_inner; ++inner) {
      const Eigen::VectorXd g = al_residual(spec, w, lambda, rho, config);
      const double resid_inf = g.lpNorm<Eigen::Infinity>();
      if (trace != nullptr) {
        const double viol = max_violation_of(constraint_residuals(unpack_plan(spec, w), spec));
        trace->push_back({outer, inner, resid_inf, viol, alpha_last});
      }
      if (resid_inf <= config.tol_stationarity) break;

      const Eigen::SparseMatrix<double> jac = al_jacobian(spec, w, lambda, rho, config);
      const auto step = solve_newton_system(jac, -g, config);
      if (!step.has_value()) break;

      // Backtracking on the residual norm.
      const double merit0 = g.norm();
      double alpha = 1.0;
      bool accepted = false;
      while (alpha >= config.line_search.min_step) {
        const Eigen::VectorXd w_try = w + alpha * (*step);
        const double merit = al_residual(spec, w_try, lambda, rho, config).norm();
        if (merit <= (1.0 - config.line_search.sufficient_decrease * alpha) * merit0) {
          w = w_try;
          accepted = true;
          break;
        }
        alpha *= config.line_search.shrink;
      }
      if (!accepted) break;  // stalled; let the outer loop reshape the problem
      alpha_last = alpha;
      ++sol.inner_iters;
    }

    ++sol.outer_iters;
    const Eigen::VectorXd g = al_residual(spec, w, lambda, rho, config);
    const double resid_inf = g.lpNorm<Eigen::Infinity>();
    const ConstraintResiduals res = constraint_residuals(unpack_plan(spec, w), spec);
    const double viol = max_violation_of(res);
    if (trace != nullptr) {
      trace->push_back({outer, -1, resid_inf, viol, alpha_last});
    }

    const double score = std::max(resid_inf, viol);
    if (score < best_score) {
      best_score = score;
      best_w = w;
      best_resid = resid_inf;
      best_viol = viol;
    }

    if (resid_inf <= config.tol_stationarity && viol <= config.tol_constraint) {
      sol.converged = true;
      best_w = w;
      best_resid = resid_inf;
      best_viol = viol;
      break;
    }

    for (size_t k = 0; k < meta.size(); ++k) {
      lambda[k] = std::max(0.0, lambda[k] + rho * res.inequalities[k]);
    }
    // Escalate the penalty when the violation is not shrinking by at least
    // x4 per outer pass, or when the observed contraction rate cannot reach
    // the tolerance inside the remaining iteration budget.
    bool grow = !(viol <= prev_viol / 4.0);
    if (!grow && viol > config.tol_constraint) {
      const double ratio = viol / prev_viol;
      const int remaining = config.max_outer - outer - 1;
      if (ratio > 0.0 && viol * std::pow(ratio, remaining) > 0.5 * config.tol_constraint) {
        grow = true;
      }
    }
    if (grow && rho < 1e12) {
      rho *= config.rho_scale;
    }
    prev_viol = viol;
  }

  sol.plan = unpack_plan(spec, best_w);
  sol.stationarity_norm = best_resid;
  sol.max_violation = best_viol;
  return finish(sol);
}

EquilibriumReport check_equilibrium(const JointPlan& plan, const GameSpec& spec, int n_probes,
                                    double radius, uint64_t seed) {
  if (n_probes < 0 || radius < 0.0) {
    throw std::invalid_argument("probe count and radius must be non-negative");
  }
  // Clamp the base controls into bounds so a zero perturbation reproduces the
  // baseline exactly.
  std::vector<std::vector<double>> base_controls = plan.controls;
  for (size_t i = 0; i < base_controls.size(); ++i) {
    const auto& params = spec.controlled[i].params;
    for (double& u : base_controls[i]) u = std::clamp(u, params.u_min, params.u_max);
  }
  const JointPlan baseline = rollout(spec, base_controls);
  const double base_viol =
      std::max(0.0, max_violation_of(constraint_residuals(baseline, spec)));

  EquilibriumReport report;
  report.per_player.assign(spec.controlled.size(), 0.0);
  Rng rng(seed);
  for (size_t i = 0; i < spec.controlled.size(); ++i) {
    const auto& params = spec.controlled[i].params;
    const double base_cost = objective(baseline, spec, static_cast<int>(i));
    for (int p = 0; p < n_probes; ++p) {
      auto probe_controls = base_controls;
      for (double& u : probe_controls[i]) {
        u = std::clamp(u + rng.uniform(-radius, radius), params.u_min, params.u_max);
      }
      const JointPlan probe = rollout(spec, probe_controls);
      const double viol = max_violation_of(constraint_residuals(probe, spec));
      if (viol > base_viol + 1e-9) continue;  // infeasible direction, not a valid deviation
      ++report.feasible_probes;
      const double decrease = base_cost - objective(probe, spec, static_cast<int>(i));
      report.per_player[i] = std::max(report.per_player[i], decrease);
    }
    report.max_improvement = std::max(report.max_improvement, report.per_player[i]);
  }
  return report;
}

}  // namespace decnash
