#pragma once

#include <cstddef>

#include "coopcart/env.hpp"

namespace coopcart {

/// Learning-rate tiers keyed on the agent's share of the joint actuation.
/// The rates must satisfy 0 < low < mid < high < 1 and the thresholds
/// 0 <= low_threshold < high_threshold <= 1.
struct ImpactParams {
  double high_threshold = 0.8;
  double low_threshold = 0.2;
  double high_rate = 5e-4;  // dominant-contribution tier (and cooperative middle tier)
  double mid_rate = 2e-4;   // conflicting middle tier
  double low_rate = 5e-5;   // minor-contribution tier and all imagined updates
};

/// Share of the total actuation magnitude contributed by one agent:
/// |u_i| / sum_j |u_j|, in [0, 1]. When nobody acts (zero denominator) every
/// agent is held equally accountable: 1/N.
double impact_factor(std::size_t agent, const JointControl& joint_control);

/// Sign of the product of the agent's control and the mean of the partners'
/// controls: +1 when they push the same way, -1 when they oppose, 0 when
/// either side is zero. Requires at least two agents.
int coordination_coefficient(std::size_t agent, const JointControl& joint_control);

enum class ImpactTier { kHigh, kMidCooperative, kMidConflicting, kLow };

struct TierSelection {
  ImpactTier tier = ImpactTier::kLow;
  double learning_rate = 0.0;
  /// True only in the conflicting middle tier, where coordination scenarios
  /// are worth simulating.
  bool simulate_coordination = false;
};

/// Maps (impact factor, coordination sign) onto a learning-rate tier.
/// Boundary values land in the middle tier: lambda in [low, high] is middle,
/// above is high, below is low. A cooperative middle tier (sign >= 0) is
/// promoted to the high learning rate; a conflicting one keeps the middle
/// rate and requests coordination simulation.
TierSelection select_tier(double impact, int coordination_sign,
                          const ImpactParams& params);

}  // namespace coopcart
