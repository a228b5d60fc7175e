#pragma once

#include <cstddef>

#include "coopcart/env.hpp"

namespace coopcart {

enum class ImaginedKind { kMarginal, kIdle, kCoop1, kCoop2 };

/// A model-generated transition. Never stored in replay memory: it is
/// consumed by exactly one training update and discarded. `control` is the
/// owning agent's (possibly substituted) control and `reward` is that
/// agent's own reward under the substituted joint control.
struct ImaginedExperience {
  CartPoleState state;
  double control = 0.0;
  double reward = 0.0;
  CartPoleState next_state;
  bool terminal = false;
  ImaginedKind kind = ImaginedKind::kMarginal;
};

/// All generators step the true environment model from `state` under a
/// substituted copy of `joint_control`, so each imagined transition is
/// bit-identical to what CartPoleEnv::step would produce for the same
/// joint control. None of them touches the model's live episode.

/// Partners zeroed, own control kept: the transition the agent would have
/// experienced acting alone.
ImaginedExperience imagine_marginal(const CartPoleEnv& model, const CartPoleState& state,
                                    std::size_t agent, const JointControl& joint_control);

/// Own control zeroed, partners kept verbatim: what the others achieve by
/// themselves.
ImaginedExperience imagine_idle(const CartPoleEnv& model, const CartPoleState& state,
                                std::size_t agent, const JointControl& joint_control);

/// Own control replaced by the mean of the partners' controls.
ImaginedExperience imagine_coop1(const CartPoleEnv& model, const CartPoleState& state,
                                 std::size_t agent, const JointControl& joint_control);

/// Every agent applies this agent's control.
ImaginedExperience imagine_coop2(const CartPoleEnv& model, const CartPoleState& state,
                                 std::size_t agent, const JointControl& joint_control);

}  // namespace coopcart
