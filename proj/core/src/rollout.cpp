#include "coopcart/rollout.hpp"

#include <stdexcept>
#include <string>

#include "textio.hpp"

namespace coopcart {

namespace {

constexpr std::uint64_t kEvalEnvStream = 1;

JointControl greedy_joint_control(const std::vector<NafNetwork>& networks,
                                  const CartPoleState& state) {
  JointControl controls(networks.size());
  const Eigen::Vector4d observation = state.observation();
  for (std::size_t i = 0; i < networks.size(); ++i)
    controls[i] = networks[i].greedy_control(observation);
  return controls;
}

void check_networks(const EnvConfig& env_config, const std::vector<NafNetwork>& networks) {
  if (networks.size() != env_config.num_agents())
    throw std::invalid_argument("rollout: " + std::to_string(networks.size()) +
                                " networks for " +
                                std::to_string(env_config.num_agents()) + " agents");
}

}  // namespace

EvalSummary evaluate_greedy(const EnvConfig& env_config,
                            const std::vector<NafNetwork>& networks, int episodes,
                            std::uint64_t seed) {
  check_networks(env_config, networks);
  if (episodes < 1) throw std::invalid_argument("evaluate_greedy: episodes must be >= 1");

  CartPoleEnv env(env_config);
  Rng rng(derive_seed(seed, kEvalEnvStream));
  EvalSummary summary;
  summary.episodes = episodes;
  summary.mean_returns.assign(networks.size(), 0.0);

  for (int episode = 0; episode < episodes; ++episode) {
    env.reset(rng);
    while (env.episode_live()) {
      const StepResult result = env.step(greedy_joint_control(networks, env.state()));
      summary.mean_length += 1.0;
      for (std::size_t i = 0; i < networks.size(); ++i)
        summary.mean_returns[i] += result.rewards[i];
    }
  }
  summary.mean_length /= episodes;
  for (double& value : summary.mean_returns) value /= episodes;
  return summary;
}

void export_value_surface(const NafNetwork& network, const ValueSurfaceSpec& spec,
                          std::ostream& out) {
  if (spec.position_count < 1 || spec.angle_count < 1)
    throw std::invalid_argument("export_value_surface: empty grid");
  if (spec.velocity_count < 0)
    throw std::invalid_argument("export_value_surface: negative velocity_count");

  const auto grid_point = [](double lo, double hi, int count, int i) {
    if (count <= 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  };

  // Fixed deterministic averaging grid over the two velocity dimensions.
  std::vector<double> velocities;
  if (spec.velocity_count <= 1) {
    velocities.push_back(0.0);
  } else {
    for (int i = 0; i < spec.velocity_count; ++i)
      velocities.push_back(grid_point(-spec.velocity_range, spec.velocity_range,
                                      spec.velocity_count, i));
  }

  out << "position,angle,value\n";
  Eigen::Vector4d observation;
  for (int si = 0; si < spec.position_count; ++si) {
    const double position =
        grid_point(spec.position_min, spec.position_max, spec.position_count, si);
    for (int ai = 0; ai < spec.angle_count; ++ai) {
      const double angle = grid_point(spec.angle_min, spec.angle_max, spec.angle_count, ai);
      double sum = 0.0;
      for (double velocity : velocities) {
        for (double angular_velocity : velocities) {
          observation << position, velocity, angle, angular_velocity;
          sum += network.value(observation);
        }
      }
      const double mean = sum / static_cast<double>(velocities.size() * velocities.size());
      out << detail::to_text(position) << ',' << detail::to_text(angle) << ','
          << detail::to_text(mean) << '\n';
    }
  }
}

void export_trajectory(const EnvConfig& env_config,
                       const std::vector<NafNetwork>& networks,
                       const CartPoleState& initial, int max_steps, std::ostream& out) {
  check_networks(env_config, networks);
  if (max_steps < 0) throw std::invalid_argument("export_trajectory: negative step count");

  const std::size_t n = networks.size();
  out << "step,position,velocity,angle,angular_velocity";
  for (std::size_t i = 1; i <= n; ++i) out << ",u_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",r_" << i;
  out << ",terminated\n";

  CartPoleEnv env(env_config);
  const auto write_row = [&](const CartPoleState& state, const JointControl& controls,
                             const std::vector<double>& rewards, bool terminated) {
    using detail::to_text;
    out << to_text(state.step_index) << ',' << to_text(state.position) << ','
        << to_text(state.velocity) << ',' << to_text(state.angle) << ','
        << to_text(state.angular_velocity);
    for (double u : controls) out << ',' << to_text(u);
    for (double r : rewards) out << ',' << to_text(r);
    out << ',' << (terminated ? 1 : 0) << '\n';
  };

  if (env.out_of_bounds(initial) || initial.step_index >= env_config.max_episode_steps) {
    write_row(initial, JointControl(n, 0.0), std::vector<double>(n, 0.0), true);
    return;
  }

  env.set_state(initial);
  for (int step = 0; step < max_steps && env.episode_live(); ++step) {
    const CartPoleState state = env.state();
    const JointControl controls = greedy_joint_control(networks, state);
    const StepResult result = env.step(controls);
    write_row(state, controls, result.rewards, result.terminated);
  }
}

}  // namespace coopcart
