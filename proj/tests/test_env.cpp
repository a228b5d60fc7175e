#include <doctest.h>

#include <cmath>
#include <vector>

#include "coopcart/env.hpp"
#include "coopcart/rng.hpp"

using namespace coopcart;

namespace {

// Independent route for the acceleration equations: both fractions
// multiplied through by the total mass, evaluated in extended precision.
Accelerations acceleration_oracle(const PhysicsParams& p, double angle,
                                  double angular_velocity, double force) {
  const long double sin_t = std::sin(static_cast<long double>(angle));
  const long double cos_t = std::cos(static_cast<long double>(angle));
  const long double total = static_cast<long double>(p.pole_mass) + p.cart_mass;
  const long double moment = static_cast<long double>(p.pole_mass) * p.half_pole_length;
  const long double w = static_cast<long double>(angular_velocity);

  const long double angular_num =
      p.gravity * sin_t * total + cos_t * (force + moment * w * w * sin_t);
  const long double angular_den =
      p.half_pole_length * (4.0L / 3.0L * total - p.pole_mass * cos_t * cos_t);
  const long double angular = angular_num / angular_den;
  const long double linear =
      (force + moment * (w * w * sin_t - angular * cos_t)) / total;
  return {static_cast<double>(angular), static_cast<double>(linear)};
}

double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / scale;
}

CartPoleState make_state(double s, double s_dot, double theta, double theta_dot,
                         std::int64_t k = 0) {
  CartPoleState x;
  x.position = s;
  x.velocity = s_dot;
  x.angle = theta;
  x.angular_velocity = theta_dot;
  x.step_index = k;
  return x;
}

}  // namespace

TEST_CASE("accelerations: pinned example values") {
  const PhysicsParams p;
  CartPoleState x;

  SUBCASE("unforced upright equilibrium") {
    const Accelerations a = accelerations(p, x, 0.0);
    CHECK(a.angular == 0.0);
    CHECK(a.linear == 0.0);
  }
  SUBCASE("upright, full positive force") {
    const Accelerations a = accelerations(p, x, 10.0);
    CHECK(rel_error(a.angular, 14.634146341463414634) < 1e-14);
    CHECK(rel_error(a.linear, 8.4257206208425720621) < 1e-14);
  }
  SUBCASE("tilted, moving, full negative force") {
    x = make_state(0.0, 0.0, 0.1, 0.5);
    const Accelerations a = accelerations(p, x, -10.0);
    CHECK(rel_error(a.angular, -16.122394885359649748) < 1e-14);
    CHECK(rel_error(a.linear, -8.3605996173021955796) < 1e-14);
  }
}

TEST_CASE("accelerations: agree with independent algebraic route") {
  const PhysicsParams p;
  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CartPoleState x =
        make_state(0.0, 0.0, rng.uniform(-0.3, 0.3), rng.uniform(-3.0, 3.0));
    const double force = rng.uniform(-10.0, 10.0);
    const Accelerations got = accelerations(p, x, force);
    const Accelerations want = acceleration_oracle(p, x.angle, x.angular_velocity, force);
    worst = std::max({worst, rel_error(got.angular, want.angular),
                      rel_error(got.linear, want.linear)});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("step: semi-implicit Euler updates velocities first") {
  CartPoleEnv env(EnvConfig{});
  const CartPoleState x = make_state(0.4, -0.2, 0.05, 0.3, 7);
  const double dt = env.config().physics.time_step;
  const StepResult got = env.simulate(x, {3.0, -1.0});

  const Accelerations a = accelerations(env.config().physics, x, 2.0);
  const double new_angular_velocity = x.angular_velocity + dt * a.angular;
  const double new_angle = x.angle + dt * new_angular_velocity;
  const double new_velocity = x.velocity + dt * a.linear;
  const double new_position = x.position + dt * new_velocity;

  CHECK(got.next.angular_velocity == new_angular_velocity);
  CHECK(got.next.angle == new_angle);
  CHECK(got.next.velocity == new_velocity);
  CHECK(got.next.position == new_position);
  CHECK(got.next.step_index == 8);

  // An explicit-Euler ordering (positions from the stale velocities) must
  // disagree, otherwise this test could not detect the order.
  CHECK(got.next.angle != x.angle + dt * x.angular_velocity);
  CHECK(got.next.position != x.position + dt * x.velocity);
}

TEST_CASE("step: force clipping (per agent, then the sum)") {
  CartPoleEnv env(EnvConfig{});
  const CartPoleState x = make_state(0.1, 0.0, 0.02, -0.1);

  // Any joint control whose clipped sum saturates produces the identical
  // transition.
  const StepResult a = env.simulate(x, {8.0, 8.0});    // sum 16 -> 10
  const StepResult b = env.simulate(x, {9.0, 3.0});    // sum 12 -> 10
  const StepResult c = env.simulate(x, {25.0, 0.0});   // per-agent clip -> 10
  CHECK(a.next.position == b.next.position);
  CHECK(a.next.velocity == b.next.velocity);
  CHECK(a.next.angle == b.next.angle);
  CHECK(a.next.angular_velocity == b.next.angular_velocity);
  CHECK(a.next.angle == c.next.angle);
  CHECK(a.next.position == c.next.position);

  // Per-agent clipping happens before the sum: (25, -3) acts as (10, -3).
  const StepResult d = env.simulate(x, {25.0, -3.0});
  const StepResult e = env.simulate(x, {10.0, -3.0});
  CHECK(d.next.angle == e.next.angle);
  CHECK(d.next.position == e.next.position);
}

TEST_CASE("reset: seeded distribution and determinism") {
  const EnvConfig config;
  CartPoleEnv env(config);

  Rng rng_a(123), rng_b(123);
  const CartPoleState first = env.reset(rng_a);
  const CartPoleState second = env.reset(rng_b);
  CHECK(first.position == second.position);
  CHECK(first.angle == second.angle);

  Rng rng(2024);
  double position_sum = 0.0, angle_sum = 0.0;
  double position_min = 1e9, position_max = -1e9;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const CartPoleState x = env.reset(rng);
    CHECK(x.velocity == 0.0);
    CHECK(x.angular_velocity == 0.0);
    CHECK(x.step_index == 0);
    REQUIRE(std::abs(x.position) <= config.reset_position_range);
    REQUIRE(std::abs(x.angle) <= config.reset_angle_range);
    position_sum += x.position;
    angle_sum += x.angle;
    position_min = std::min(position_min, x.position);
    position_max = std::max(position_max, x.position);
  }
  CHECK(std::abs(position_sum / n) < 0.05);
  CHECK(std::abs(angle_sum / n) < 2e-3);
  // The draw really spans the range.
  CHECK(position_min < -2.0);
  CHECK(position_max > 2.0);
}

TEST_CASE("reward: band table and terminal override") {
  CartPoleEnv env(EnvConfig{});

  SUBCASE("position agent bands") {
    CHECK(env.reward(1, make_state(0.09, 0, 0, 0), false) == 5.0);
    CHECK(env.reward(1, make_state(0.3, 0, 0, 0), false) == 1.0);
    CHECK(env.reward(1, make_state(1.0, 0, 0, 0), false) == 0.0);
    CHECK(env.reward(1, make_state(-0.09, 0, 0, 0), false) == 5.0);
    CHECK(env.reward(1, make_state(0.09, 0, 0, 0), true) == -1.0);
  }
  SUBCASE("balance agent") {
    CHECK(env.reward(0, make_state(0, 0, 0.1, 0), false) == 1.0);
    CHECK(env.reward(0, make_state(0, 0, -0.2, 0), false) == 1.0);
    CHECK(env.reward(0, make_state(0, 0, 0.0, 0), true) == -1.0);
  }
  SUBCASE("exactly one band fires for the position agent") {
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
      const double s = rng.uniform(-2.6, 2.6);
      const bool failed = rng.uniform() < 0.3;
      const double r = env.reward(1, make_state(s, 0, 0, 0), failed);
      int fired = 0;
      if (failed) ++fired;
      if (!failed && std::abs(s) < 0.1) ++fired;
      if (!failed && std::abs(s) >= 0.1 && std::abs(s) < 0.5) ++fired;
      if (!failed && std::abs(s) >= 0.5) ++fired;
      CHECK(fired == 1);
      const double expected = failed              ? -1.0
                              : std::abs(s) < 0.1 ? 5.0
                              : std::abs(s) < 0.5 ? 1.0
                                                  : 0.0;
      CHECK(r == expected);
    }
  }
}

TEST_CASE("termination: boundary conventions") {
  CartPoleEnv env(EnvConfig{});
  // Angle bound is closed, position bound is open.
  CHECK(env.out_of_bounds(make_state(0, 0, 0.21, 0)));
  CHECK(env.out_of_bounds(make_state(0, 0, -0.21, 0)));
  CHECK(!env.out_of_bounds(make_state(0, 0, 0.2099, 0)));
  CHECK(!env.out_of_bounds(make_state(2.4, 0, 0, 0)));
  CHECK(env.out_of_bounds(make_state(2.4000001, 0, 0, 0)));
}

TEST_CASE("step: pinned transition examples") {
  EnvConfig config;
  CartPoleEnv env(config);

  SUBCASE("equilibrium holds and pays both agents") {
    env.set_state(make_state(0, 0, 0, 0));
    const StepResult r = env.step({0.0, 0.0});
    CHECK(r.next.position == 0.0);
    CHECK(r.next.angle == 0.0);
    CHECK(r.next.step_index == 1);
    CHECK(!r.terminated);
    CHECK(r.rewards[0] == 1.0);
    CHECK(r.rewards[1] == 5.0);
  }
  SUBCASE("bounds exit pays -1 to everyone") {
    env.set_state(make_state(2.39, 2.0, 0.0, 0.0));
    const StepResult r = env.step({10.0, 10.0});
    CHECK(r.terminated);
    CHECK(r.rewards[0] == -1.0);
    CHECK(r.rewards[1] == -1.0);
  }
  SUBCASE("time-limit termination keeps state rewards") {
    env.set_state(make_state(0, 0, 0, 0, config.max_episode_steps - 1));
    const StepResult r = env.step({0.0, 0.0});
    CHECK(r.terminated);
    CHECK(r.rewards[0] == 1.0);
    CHECK(r.rewards[1] == 5.0);
  }
  SUBCASE("stepping a terminated episode throws") {
    env.set_state(make_state(2.39, 2.0, 0.0, 0.0));
    (void)env.step({10.0, 10.0});
    CHECK_THROWS_AS((void)env.step({0.0, 0.0}), std::logic_error);
  }
}

TEST_CASE("episode: live-state invariants and determinism") {
  EnvConfig config;
  CartPoleEnv env_a(config), env_b(config);
  Rng reset_a(5), reset_b(5), controls(6);

  env_a.reset(reset_a);
  env_b.reset(reset_b);
  std::int64_t previous_index = 0;
  while (env_a.episode_live()) {
    const JointControl u = {controls.uniform(-10, 10), controls.uniform(-10, 10)};
    const StepResult ra = env_a.step(u);
    const StepResult rb = env_b.step(u);
    CHECK(ra.next.position == rb.next.position);
    CHECK(ra.next.angle == rb.next.angle);
    CHECK(ra.terminated == rb.terminated);
    CHECK(ra.next.step_index == previous_index + 1);
    previous_index = ra.next.step_index;
    if (!ra.terminated) {
      CHECK(std::abs(ra.next.position) <= config.position_limit);
      CHECK(std::abs(ra.next.angle) < config.angle_limit);
    }
  }
}

// With the reference equations taken verbatim (signed gravity included), the
// unforced upright pole is a stable oscillator: the angular acceleration
// opposes the displacement and the amplitude stays bounded.
TEST_CASE("dynamics: verbatim equations make the upright pole oscillate") {
  const PhysicsParams p;
  for (double theta : {0.01, 0.05, 0.1, -0.01, -0.05, -0.1}) {
    const Accelerations a = accelerations(p, make_state(0, 0, theta, 0), 0.0);
    CHECK(a.angular * theta < 0.0);
  }

  EnvConfig config;
  config.position_limit = 100.0;  // watch the pole only
  CartPoleEnv env(config);
  env.set_state(make_state(0, 0, 0.05, 0));
  double max_angle = 0.0, min_angle = 0.0;
  for (int k = 0; k < 400; ++k) {
    const StepResult r = env.step({0.0, 0.0});
    max_angle = std::max(max_angle, r.next.angle);
    min_angle = std::min(min_angle, r.next.angle);
    if (r.terminated) break;
  }
  CHECK(max_angle < 0.08);    // bounded, no runaway growth
  CHECK(min_angle < -0.02);   // swings through the other side
}
