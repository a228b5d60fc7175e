#include "coopcart/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace coopcart {

Accelerations accelerations(const PhysicsParams& p, const CartPoleState& x,
                            double clipped_force) {
  const double sin_theta = std::sin(x.angle);
  const double cos_theta = std::cos(x.angle);
  const double total_mass = p.pole_mass + p.cart_mass;
  const double pole_moment = p.pole_mass * p.half_pole_length;

  const double inner =
      (-clipped_force - pole_moment * x.angular_velocity * x.angular_velocity * sin_theta) /
      total_mass;
  const double angular =
      (p.gravity * sin_theta - cos_theta * inner) /
      (p.half_pole_length * (4.0 / 3.0 - p.pole_mass * cos_theta * cos_theta / total_mass));
  const double linear =
      (clipped_force +
       pole_moment * (x.angular_velocity * x.angular_velocity * sin_theta -
                      angular * cos_theta)) /
      total_mass;
  return {angular, linear};
}

CartPoleEnv::CartPoleEnv(EnvConfig config) : config_(std::move(config)) {
  if (config_.rewards.empty())
    throw std::invalid_argument("CartPoleEnv: at least one agent reward spec required");
}

const CartPoleState& CartPoleEnv::reset(Rng& rng) {
  state_ = CartPoleState{};
  state_.position = rng.uniform(-config_.reset_position_range, config_.reset_position_range);
  state_.angle = rng.uniform(-config_.reset_angle_range, config_.reset_angle_range);
  live_ = true;
  return state_;
}

bool CartPoleEnv::out_of_bounds(const CartPoleState& x) const {
  return std::abs(x.position) > config_.position_limit ||
         std::abs(x.angle) >= config_.angle_limit;
}

double CartPoleEnv::reward(std::size_t agent, const CartPoleState& x, bool failed) const {
  const RewardSpec& spec = config_.rewards.at(agent);
  if (failed) return spec.terminal_value;
  if (spec.role == RewardSpec::Role::kBalance)
    return std::abs(x.angle) < config_.angle_limit ? spec.alive_value : 0.0;
  const double distance = std::abs(x.position - spec.target);
  if (distance < spec.thresholds[0]) return spec.values[0];
  if (distance < spec.thresholds[1]) return spec.values[1];
  return spec.values[2];
}

StepResult CartPoleEnv::simulate(const CartPoleState& x, const JointControl& controls) const {
  if (controls.size() != num_agents())
    throw std::invalid_argument("CartPoleEnv: joint control has " +
                                std::to_string(controls.size()) + " entries, expected " +
                                std::to_string(num_agents()));

  double force_sum = 0.0;
  for (double u : controls)
    force_sum += std::clamp(u, -config_.control_limit, config_.control_limit);
  const double force =
      std::clamp(force_sum, -config_.physics.force_clip, config_.physics.force_clip);

  const Accelerations acc = accelerations(config_.physics, x, force);
  const double dt = config_.physics.time_step;

  CartPoleState next;
  next.angular_velocity = x.angular_velocity + dt * acc.angular;
  next.angle = x.angle + dt * next.angular_velocity;
  next.velocity = x.velocity + dt * acc.linear;
  next.position = x.position + dt * next.velocity;
  next.step_index = x.step_index + 1;

  const bool failed = out_of_bounds(next);
  const bool terminated = failed || next.step_index >= config_.max_episode_steps;

  StepResult result{next, std::vector<double>(num_agents()), terminated};
  for (std::size_t i = 0; i < num_agents(); ++i) result.rewards[i] = reward(i, next, failed);
  return result;
}

StepResult CartPoleEnv::step(const JointControl& controls) {
  if (!live_) throw std::logic_error("CartPoleEnv::step: episode is not live; reset first");
  StepResult result = simulate(state_, controls);
  state_ = result.next;
  if (result.terminated) live_ = false;
  return result;
}

void CartPoleEnv::set_state(const CartPoleState& x) {
  state_ = x;
  live_ = true;
}

}  // namespace coopcart
