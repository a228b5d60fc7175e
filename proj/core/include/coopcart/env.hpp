#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "coopcart/rng.hpp"

namespace coopcart {

/// Physical constants of the cart-pole. `gravity` is signed and kept
/// verbatim from the reference dynamics (default −9.8); with that sign the
/// upright pole behaves as a stable oscillator rather than an unstable
/// inverted pendulum. The dynamics tests pin the formula, not textbook
/// cart-pole behavior.
struct PhysicsParams {
  double gravity = -9.8;           // m/s^2, signed
  double pole_mass = 0.1;          // kg
  double cart_mass = 1.0;          // kg
  double half_pole_length = 0.5;   // m
  double force_clip = 10.0;        // N, symmetric bound on the summed force
  double time_step = 0.02;         // s, semi-implicit Euler step
};

/// Physical state plus episode bookkeeping. `step_index` counts transitions
/// within the current episode and increases by exactly one per step.
struct CartPoleState {
  double position = 0.0;          // s, m
  double velocity = 0.0;          // s_dot, m/s
  double angle = 0.0;             // theta, rad, 0 = upright
  double angular_velocity = 0.0;  // theta_dot, rad/s
  std::int64_t step_index = 0;

  /// Network observation layout: [position, velocity, angle, angular_velocity].
  Eigen::Vector4d observation() const {
    return {position, velocity, angle, angular_velocity};
  }
};

/// One force per agent, in newtons.
using JointControl = std::vector<double>;

/// Per-agent reward shape. A `balance` agent is paid for the pole staying
/// inside the angle bounds; a `position` agent is paid by distance bands
/// around a target cart position. Both receive `terminal_value` when a
/// transition leaves the state bounds.
struct RewardSpec {
  enum class Role { kBalance, kPosition };
  Role role = Role::kBalance;
  double target = 0.0;                              // position role: s*
  std::array<double, 3> thresholds{0.1, 0.5, 2.4};  // strictly increasing band edges (m)
  std::array<double, 3> values{5.0, 1.0, 0.0};      // rewards of the three bands
  double alive_value = 1.0;                         // balance role: reward per live step
  double terminal_value = -1.0;                     // on bounds violation
};

struct EnvConfig {
  PhysicsParams physics;
  double control_limit = 10.0;        // per-agent |u_i| bound, N
  double position_limit = 2.4;        // m; |s| > limit terminates
  double angle_limit = 0.21;          // rad; |theta| >= limit terminates
  double reset_position_range = 2.3;  // s0 ~ U(-r, r)
  double reset_angle_range = 0.085;   // theta0 ~ U(-r, r)
  std::int64_t max_episode_steps = 3000;
  std::vector<RewardSpec> rewards = {
      RewardSpec{},
      RewardSpec{.role = RewardSpec::Role::kPosition}};

  std::size_t num_agents() const { return rewards.size(); }
};

struct Accelerations {
  double angular = 0.0;  // theta_ddot, rad/s^2
  double linear = 0.0;   // s_ddot, m/s^2
};

/// Evaluates the nonlinear cart-pole accelerations for an already clipped
/// force sum. The angular acceleration is computed first and substituted
/// into the linear one.
Accelerations accelerations(const PhysicsParams& p, const CartPoleState& x,
                            double clipped_force);

struct StepResult {
  CartPoleState next;
  std::vector<double> rewards;  // one per agent, computed on `next`
  bool terminated = false;      // bounds violation or episode step limit
};

/// Deterministic N-agent cart-pole. Instances hold no shared state and can
/// be moved freely between threads; one instance serves one logical thread.
///
/// The transition function doubles as the system model agents are assumed
/// to know: `simulate` is a pure function of (state, joint control), and
/// `step` is exactly `simulate` applied to the live episode state.
class CartPoleEnv {
 public:
  explicit CartPoleEnv(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  std::size_t num_agents() const { return config_.num_agents(); }

  /// Starts a new episode: position and angle drawn uniformly (position
  /// first), velocities zero, step_index zero.
  const CartPoleState& reset(Rng& rng);

  /// Pure transition: per-agent clipping, force-sum clipping, semi-implicit
  /// Euler (velocities from accelerations first, then positions from the
  /// updated velocities), rewards on the successor state. Never touches the
  /// live episode.
  StepResult simulate(const CartPoleState& x, const JointControl& controls) const;

  /// Advances the live episode. Stepping a terminated (or never reset)
  /// episode is a caller error and throws std::logic_error.
  StepResult step(const JointControl& controls);

  /// Step-wise reward of one agent evaluated on a successor state.
  /// `failed` is the bounds-violation flag: the −1 terminal override applies
  /// only to it, not to time-limit termination, so an episode that survives
  /// to the step limit collects its ordinary state rewards throughout.
  double reward(std::size_t agent, const CartPoleState& x, bool failed) const;

  /// True when the state violates the position or angle bounds. The angle
  /// bound is closed (|theta| = limit terminates); the position bound is
  /// open (|s| must exceed the limit).
  bool out_of_bounds(const CartPoleState& x) const;

  bool episode_live() const { return live_; }
  const CartPoleState& state() const { return state_; }

  /// Installs an arbitrary live state (evaluation rollouts, tests).
  void set_state(const CartPoleState& x);

 private:
  EnvConfig config_;
  CartPoleState state_;
  bool live_ = false;
};

}  // namespace coopcart
