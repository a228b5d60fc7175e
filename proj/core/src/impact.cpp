#include "coopcart/impact.hpp"

#include <cmath>
#include <stdexcept>

namespace coopcart {

double impact_factor(std::size_t agent, const JointControl& joint_control) {
  if (agent >= joint_control.size())
    throw std::out_of_range("impact_factor: invalid agent index");
  double total = 0.0;
  for (double u : joint_control) total += std::abs(u);
  if (total == 0.0) return 1.0 / static_cast<double>(joint_control.size());
  return std::abs(joint_control[agent]) / total;
}

int coordination_coefficient(std::size_t agent, const JointControl& joint_control) {
  if (joint_control.size() < 2)
    throw std::invalid_argument("coordination_coefficient: needs at least two agents");
  if (agent >= joint_control.size())
    throw std::out_of_range("coordination_coefficient: invalid agent index");
  double partner_sum = 0.0;
  for (std::size_t j = 0; j < joint_control.size(); ++j)
    if (j != agent) partner_sum += joint_control[j];
  const double partner_mean = partner_sum / static_cast<double>(joint_control.size() - 1);
  const double product = partner_mean * joint_control[agent];
  return (product > 0.0) - (product < 0.0);
}

TierSelection select_tier(double impact, int coordination_sign,
                          const ImpactParams& params) {
  if (impact > params.high_threshold)
    return {ImpactTier::kHigh, params.high_rate, false};
  if (impact >= params.low_threshold) {
    if (coordination_sign >= 0)
      return {ImpactTier::kMidCooperative, params.high_rate, false};
    return {ImpactTier::kMidConflicting, params.mid_rate, true};
  }
  return {ImpactTier::kLow, params.low_rate, false};
}

}  // namespace coopcart
