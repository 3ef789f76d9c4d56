#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "decnash/idm.hpp"
#include "decnash/path.hpp"
#include "decnash/rng.hpp"
#include "decnash/vehicle.hpp"

using decnash::IdmParams;
using decnash::PathPolynomial;
using decnash::VehicleState;

namespace {

PathPolynomial ray_path(double x0, double y0, double angle, double len = 200.0) {
  return PathPolynomial{{x0, len * std::cos(angle)}, {y0, len * std::sin(angle)}, len, len};
}

VehicleState state_at(int id, double x, double y, double v = 0.0) {
  VehicleState st;
  st.id = id;
  st.p_x = x;
  st.p_y = y;
  st.v = v;
  return st;
}

// Same acceleration law, written out a second time straight from the algebra,
// as a guard against transcription slips in the library version.
double oracle_accel(double v, std::optional<std::pair<double, double>> gap,
                    const IdmParams& p) {
  double gap_term = 0.0;
  if (gap) {
    const auto [d, r] = *gap;
    if (d <= 0.0) return -p.b_emergency;
    const double desired =
        p.d_min + p.tau * v + v * r / (2.0 * std::sqrt(p.a_max * p.b_pref));
    gap_term = (desired / d) * (desired / d);
  }
  double a = p.a_max * (1.0 - std::pow(v / p.v_target, 4.0) - gap_term);
  if (a > p.a_max) a = p.a_max;
  if (a < -p.b_emergency) a = -p.b_emergency;
  return a;
}

PathPolynomial rotate_translate(const PathPolynomial& path, double angle, double tx,
                                double ty) {
  PathPolynomial out = path;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (size_t k = 0; k < path.coeffs_x.size(); ++k) {
    out.coeffs_x[k] = c * path.coeffs_x[k] - s * path.coeffs_y[k];
    out.coeffs_y[k] = s * path.coeffs_x[k] + c * path.coeffs_y[k];
  }
  out.coeffs_x[0] += tx;
  out.coeffs_y[0] += ty;
  return out;
}

}  // namespace

TEST_SUITE("idm") {

TEST_CASE("an empty scene selects no follow vehicle") {
  const PathPolynomial path = ray_path(0, 0, 0);
  const VehicleState ego = state_at(1, 0, 0, 8.0);
  CHECK_FALSE(decnash::select_follow(ego, path, {}, IdmParams{}).has_value());
}

TEST_CASE("the nearest vehicle inside the cone wins") {
  const PathPolynomial path = ray_path(0, 0, 0);
  const VehicleState ego = state_at(1, 0, 0, 8.0);
  const std::vector<VehicleState> others{state_at(2, 8, 0), state_at(3, 5, 0)};
  const auto picked = decnash::select_follow(ego, path, others, IdmParams{});
  REQUIRE(picked.has_value());
  CHECK(*picked == 3);
}

TEST_CASE("vehicles outside the follow cone are ignored") {
  const PathPolynomial path = ray_path(0, 0, 0);
  const VehicleState ego = state_at(1, 0, 0, 8.0);
  const auto bearing = [](double deg, double dist) {
    const double rad = deg * std::numbers::pi / 180.0;
    return state_at(9, dist * std::cos(rad), dist * std::sin(rad));
  };

  CHECK_FALSE(decnash::select_follow(ego, path, {bearing(30.0, 5.0)}, IdmParams{}).has_value());
  CHECK(decnash::select_follow(ego, path, {bearing(15.0, 5.0)}, IdmParams{}).has_value());
  CHECK(decnash::select_follow(ego, path, {bearing(19.9, 5.0)}, IdmParams{}).has_value());
  CHECK_FALSE(decnash::select_follow(ego, path, {bearing(20.1, 5.0)}, IdmParams{}).has_value());

  // A nearer vehicle off to the side loses to a farther one dead ahead.
  const std::vector<VehicleState> mixed{bearing(25.0, 3.0), state_at(4, 12, 0)};
  const auto picked = decnash::select_follow(ego, path, mixed, IdmParams{});
  REQUIRE(picked.has_value());
  CHECK(*picked == 4);
}

TEST_CASE("follow selection is invariant under rigid motion") {
  decnash::Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const double ego_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const PathPolynomial path = ray_path(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
                                         ego_angle);
    VehicleState ego = state_at(0, 0, 0, 8.0);
    ego.s = rng.uniform(0.0, 10.0);
    const Eigen::Vector2d pos = decnash::eval_position(path, ego.s);
    ego.p_x = pos.x();
    ego.p_y = pos.y();

    std::vector<VehicleState> others;
    for (int k = 1; k <= 6; ++k) {
      others.push_back(state_at(k, ego.p_x + rng.uniform(-30.0, 30.0),
                                ego.p_y + rng.uniform(-30.0, 30.0)));
    }
    const auto base = decnash::select_follow(ego, path, others, IdmParams{});

    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double tx = rng.uniform(-50.0, 50.0);
    const double ty = rng.uniform(-50.0, 50.0);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    VehicleState ego_m = ego;
    ego_m.p_x = c * ego.p_x - s * ego.p_y + tx;
    ego_m.p_y = s * ego.p_x + c * ego.p_y + ty;
    std::vector<VehicleState> others_m = others;
    for (auto& other : others_m) {
      const double x = other.p_x;
      const double y = other.p_y;
      other.p_x = c * x - s * y + tx;
      other.p_y = s * x + c * y + ty;
    }
    const auto moved =
        decnash::select_follow(ego_m, rotate_translate(path, angle, tx, ty), others_m,
                               IdmParams{});
    CHECK(base.has_value() == moved.has_value());
    if (base && moved) CHECK(*base == *moved);
  }
}

TEST_CASE("free flow is a fixed point of the acceleration law") {
  IdmParams params;
  params.v_target = 9.0;
  CHECK(decnash::idm_accel(9.0, params) == doctest::Approx(0.0));
  CHECK(decnash::idm_accel(0.0, params) == doctest::Approx(params.a_max));
  for (double v = 0.5; v < 9.0; v += 0.5) CHECK(decnash::idm_accel(v, params) > 0.0);
  for (double v = 9.5; v < 14.0; v += 0.5) CHECK(decnash::idm_accel(v, params) < 0.0);
}

TEST_CASE("the acceleration law matches an independently coded formula") {
  decnash::Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    IdmParams params;
    params.d_min = rng.uniform(0.5, 4.0);
    params.tau = rng.uniform(0.5, 3.0);
    params.a_max = rng.uniform(1.0, 4.0);
    params.b_pref = rng.uniform(1.0, 4.0);
    params.v_target = rng.uniform(4.0, 14.0);
    const double v = rng.uniform(0.0, 15.0);
    if (trial % 3 == 0) {
      CHECK(decnash::idm_accel(v, params) ==
            doctest::Approx(oracle_accel(v, std::nullopt, params)).epsilon(1e-12));
    } else {
      const double d = rng.uniform(-1.0, 60.0);
      const double r = rng.uniform(-10.0, 10.0);
      CHECK(decnash::idm_accel(v, d, r, params) ==
            doctest::Approx(oracle_accel(v, std::make_pair(d, r), params)).epsilon(1e-12));
    }
  }
}

TEST_CASE("a vanished gap commands the emergency floor") {
  const IdmParams params;
  CHECK(decnash::idm_accel(8.0, 0.0, 0.0, params) == -params.b_emergency);
  CHECK(decnash::idm_accel(8.0, -2.0, 0.0, params) == -params.b_emergency);
  CHECK(decnash::idm_accel(8.0, 0.05, 5.0, params) == -params.b_emergency);  // clamp
}

TEST_CASE("acceleration stays within the clamp interval") {
  decnash::Rng rng(31);
  const IdmParams params;
  for (int trial = 0; trial < 500; ++trial) {
    const double a = decnash::idm_accel(rng.uniform(0.0, 20.0), rng.uniform(-5.0, 80.0),
                                        rng.uniform(-15.0, 15.0), params);
    CHECK(a >= -params.b_emergency);
    CHECK(a <= params.a_max);
  }
}

TEST_CASE("more room never commands harder braking") {
  decnash::Rng rng(88);
  const IdmParams params;
  for (int trial = 0; trial < 100; ++trial) {
    const double v = rng.uniform(0.0, 14.0);
    const double r = rng.uniform(-8.0, 8.0);
    double prev = -std::numeric_limits<double>::infinity();
    for (double d = 0.5; d < 60.0; d += 0.5) {
      const double a = decnash::idm_accel(v, d, r, params);
      CHECK(a >= prev - 1e-12);
      prev = a;
    }
  }
}

TEST_CASE("a follow vehicle on the ego path reduces to gap and speed difference") {
  const PathPolynomial path = ray_path(0, 0, 0);
  VehicleState ego = state_at(1, 0, 0, 7.0);
  ego.s = 0.0;

  // Same direction, same speed: a 10 m gap and no closing.
  auto cast = decnash::cast_to_path(ego, path, 10.0, 0.0, 7.0, 0.0);
  REQUIRE(cast.has_value());
  CHECK(cast->d == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(cast->r == doctest::Approx(0.0).epsilon(1e-6));

  // Crossing traffic moving perpendicular to the path has no tangential
  // component, so the full ego speed counts as closing.
  cast = decnash::cast_to_path(ego, path, 10.0, 0.0, 0.0, 4.0);
  REQUIRE(cast.has_value());
  CHECK(cast->r == doctest::Approx(ego.v).epsilon(1e-9));
}

TEST_CASE("lateral offset does not shift the projected gap") {
  const PathPolynomial path = ray_path(0, 0, 0);
  VehicleState ego = state_at(1, 0, 0, 7.0);
  const auto cast = decnash::cast_to_path(ego, path, 10.0, 1.0, 5.0, 0.0);
  REQUIRE(cast.has_value());
  CHECK(cast->d == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("casting matches a dense scan on a curved path") {
  std::vector<Eigen::Vector2d> arc;
  for (int k = 0; k < 40; ++k) {
    const double t = 0.04 * k;
    arc.emplace_back(30.0 * std::cos(t), 30.0 * std::sin(t));
  }
  const PathPolynomial path = decnash::fit_path(arc, 10, nullptr);

  VehicleState ego = state_at(1, 0, 0, 8.0);
  ego.s = 5.0;
  const Eigen::Vector2d pos = decnash::eval_position(path, ego.s);
  ego.p_x = pos.x();
  ego.p_y = pos.y();

  // Follow vehicle hovering 0.3 m off the path near arc progress 20.
  const decnash::PathPoint ref = decnash::eval_extended(path, 20.0);
  const double tangent_norm = std::hypot(ref.dx, ref.dy);
  const double fx = ref.x - 0.3 * ref.dy / tangent_norm;
  const double fy = ref.y + 0.3 * ref.dx / tangent_norm;
  const double fvx = 6.0 * ref.dx / tangent_norm;
  const double fvy = 6.0 * ref.dy / tangent_norm;

  const auto cast = decnash::cast_to_path(ego, path, fx, fy, fvx, fvy);
  REQUIRE(cast.has_value());

  // Millimeter-resolution scan as the reference projection.
  double best_s = ego.s;
  double best = std::numeric_limits<double>::infinity();
  for (double s = ego.s; s <= ego.s + 40.0; s += 1e-3) {
    const decnash::PathPoint p = decnash::eval_extended(path, s);
    const double d2 = (p.x - fx) * (p.x - fx) + (p.y - fy) * (p.y - fy);
    if (d2 < best) {
      best = d2;
      best_s = s;
    }
  }
  CHECK(cast->d == doctest::Approx(best_s - ego.s).epsilon(2e-3));

  const decnash::PathPoint at_ref = decnash::eval_extended(path, best_s);
  const double norm_ref = std::hypot(at_ref.dx, at_ref.dy);
  const double r_ref = ego.v - (fvx * at_ref.dx + fvy * at_ref.dy) / norm_ref;
  CHECK(cast->r == doctest::Approx(r_ref).epsilon(1e-3));

  // The refined projection is at least as close as the best grid sample.
  const decnash::PathPoint at_star = decnash::eval_extended(path, ego.s + cast->d);
  const double d2_star =
      (at_star.x - fx) * (at_star.x - fx) + (at_star.y - fy) * (at_star.y - fy);
  CHECK(d2_star <= best + 1e-12);
}

TEST_CASE("projections behind the ego or beyond the window are rejected") {
  const PathPolynomial path = ray_path(0, 0, 0);
  VehicleState ego = state_at(1, 10, 0, 7.0);
  ego.s = 10.0;
  CHECK_FALSE(decnash::cast_to_path(ego, path, 4.0, 0.0, 5.0, 0.0).has_value());
  CHECK_FALSE(decnash::cast_to_path(ego, path, 55.0, 0.0, 5.0, 0.0).has_value());
  CHECK(decnash::cast_to_path(ego, path, 45.0, 0.0, 5.0, 0.0).has_value());
}

TEST_CASE("parameters are validated") {
  const auto reject = [](auto mutate) {
    IdmParams params;
    mutate(params);
    CHECK_THROWS_AS(decnash::validate(params), std::invalid_argument);
  };
  reject([](IdmParams& p) { p.d_min = 0.0; });
  reject([](IdmParams& p) { p.tau = -1.0; });
  reject([](IdmParams& p) { p.a_max = 0.0; });
  reject([](IdmParams& p) { p.b_pref = 0.0; });
  reject([](IdmParams& p) { p.v_target = 0.0; });
  reject([](IdmParams& p) { p.b_emergency = 0.0; });
  reject([](IdmParams& p) { p.follow_half_angle = 4.0; });
  CHECK_NOTHROW(decnash::validate(IdmParams{}));
}

}  // TEST_SUITE
