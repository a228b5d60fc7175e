#include "coopcart/imagination.hpp"

#include <stdexcept>

namespace coopcart {

namespace {

ImaginedExperience simulate_substituted(const CartPoleEnv& model,
                                        const CartPoleState& state, std::size_t agent,
                                        const JointControl& substituted,
                                        ImaginedKind kind) {
  const StepResult result = model.simulate(state, substituted);
  ImaginedExperience imagined;
  imagined.state = state;
  imagined.control = substituted[agent];
  imagined.reward = result.rewards[agent];
  imagined.next_state = result.next;
  imagined.terminal = result.terminated;
  imagined.kind = kind;
  return imagined;
}

void check_agent(std::size_t agent, const JointControl& joint_control) {
  if (agent >= joint_control.size())
    throw std::out_of_range("imagination: invalid agent index");
}

}  // namespace

ImaginedExperience imagine_marginal(const CartPoleEnv& model, const CartPoleState& state,
                                    std::size_t agent, const JointControl& joint_control) {
  check_agent(agent, joint_control);
  JointControl substituted(joint_control.size(), 0.0);
  substituted[agent] = joint_control[agent];
  return simulate_substituted(model, state, agent, substituted, ImaginedKind::kMarginal);
}

ImaginedExperience imagine_idle(const CartPoleEnv& model, const CartPoleState& state,
                                std::size_t agent, const JointControl& joint_control) {
  check_agent(agent, joint_control);
  JointControl substituted = joint_control;
  substituted[agent] = 0.0;
  return simulate_substituted(model, state, agent, substituted, ImaginedKind::kIdle);
}

ImaginedExperience imagine_coop1(const CartPoleEnv& model, const CartPoleState& state,
                                 std::size_t agent, const JointControl& joint_control) {
  check_agent(agent, joint_control);
  if (joint_control.size() < 2)
    throw std::invalid_argument("imagine_coop1: needs at least two agents");
  double partner_sum = 0.0;
  for (std::size_t j = 0; j < joint_control.size(); ++j)
    if (j != agent) partner_sum += joint_control[j];
  JointControl substituted = joint_control;
  substituted[agent] = partner_sum / static_cast<double>(joint_control.size() - 1);
  return simulate_substituted(model, state, agent, substituted, ImaginedKind::kCoop1);
}

ImaginedExperience imagine_coop2(const CartPoleEnv& model, const CartPoleState& state,
                                 std::size_t agent, const JointControl& joint_control) {
  check_agent(agent, joint_control);
  JointControl substituted(joint_control.size(), joint_control[agent]);
  return simulate_substituted(model, state, agent, substituted, ImaginedKind::kCoop2);
}

}  // namespace coopcart
