#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "coopcart/env.hpp"
#include "coopcart/qnet.hpp"

namespace coopcart {

struct EvalSummary {
  int episodes = 0;
  double mean_length = 0.0;
  std::vector<double> mean_returns;  // undiscounted, one per agent
};

/// Deterministic greedy rollouts (no exploration, evaluation mode): every
/// agent applies its clamped mean control. Episode starts are drawn from the
/// environment's reset distribution under the given seed.
EvalSummary evaluate_greedy(const EnvConfig& env_config,
                            const std::vector<NafNetwork>& networks, int episodes,
                            std::uint64_t seed);

/// Grid over cart position and pole angle for the state-value surface
/// export. The velocity dimensions are averaged over a fixed symmetric grid
/// of `velocity_count` points spanning [-velocity_range, velocity_range]
/// (count 0 or 1 evaluates at zero velocity).
struct ValueSurfaceSpec {
  double position_min = -2.4;
  double position_max = 2.4;
  int position_count = 49;
  double angle_min = -0.21;
  double angle_max = 0.21;
  int angle_count = 43;
  double velocity_range = 1.0;
  int velocity_count = 5;
};

/// Writes "position,angle,value" rows (position-major) where value is
/// max_u Q(x, u) = V(x) averaged over the velocity grid. Throws
/// std::invalid_argument on an empty grid.
void export_value_surface(const NafNetwork& network, const ValueSurfaceSpec& spec,
                          std::ostream& out);

/// Rolls the greedy joint policy from `initial` and writes one row per
/// executed step: step, state, per-agent controls, per-agent rewards,
/// terminated. An initially terminal state produces a single terminated row.
void export_trajectory(const EnvConfig& env_config,
                       const std::vector<NafNetwork>& networks,
                       const CartPoleState& initial, int max_steps, std::ostream& out);

}  // namespace coopcart
