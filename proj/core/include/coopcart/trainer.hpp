#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coopcart/config.hpp"
#include "coopcart/env.hpp"
#include "coopcart/imagination.hpp"
#include "coopcart/impact.hpp"
#include "coopcart/qnet.hpp"
#include "coopcart/replay.hpp"
#include "coopcart/rng.hpp"

namespace coopcart {

struct AgentEpisodeMetrics {
  double undiscounted_return = 0.0;
  double discounted_return = 0.0;
  double mean_loss = 0.0;  // over update samples; 0 when no update ran
  std::uint64_t sampled = 0;             // experiences drawn from replay
  std::uint64_t tier_high = 0;           // real-experience updates per tier
  std::uint64_t tier_mid_coop = 0;
  std::uint64_t tier_mid_conflict = 0;
  std::uint64_t tier_low = 0;
  std::uint64_t marginal = 0;            // partner-marginalized imagined updates
  std::uint64_t coordination_events = 0; // each simulates idle/coop1/coop2 (3 updates)
  std::uint64_t update_samples = 0;      // gradient-update samples consumed
  std::uint64_t optimizer_steps = 0;
  std::uint64_t skipped_updates = 0;     // steps with too few stored experiences
};

struct EpisodeMetrics {
  int episode = 0;  // 1-based
  int length = 0;   // environment steps taken
  double epsilon = 0.0;  // exploration rate used during the episode
  std::vector<AgentEpisodeMetrics> agents;
};

/// One decentralized learner: its own network pair, optimizer, replay memory
/// and exploration state. An agent only ever sees the environment state, the
/// retrospective joint control and its own reward; it never touches another
/// agent's parameters, rewards or discount.
class Agent {
 public:
  Agent(std::size_t index, const RunConfig& config, Rng init_rng, Rng act_rng,
        Rng train_rng);

  std::size_t index() const { return index_; }

  /// Epsilon-greedy control from the online network (evaluation mode).
  double act(const CartPoleState& state);

  /// Stores one real transition, stamped with the global step and the
  /// agent's current exploration rate.
  void store(const CartPoleState& state, const JointControl& joint_control,
             double own_reward, const CartPoleState& next_state, bool terminal,
             std::uint64_t global_step);

  /// One learning pass: TER mini-batch, per-experience imagination gates,
  /// impact-tier selection, then a single (bucketed) network update. Skips
  /// silently while the memory holds fewer than mini_batch experiences.
  void learn(const CartPoleEnv& model, std::uint64_t global_step);

  void sync_target();
  void decay_epsilon();

  double epsilon() const { return epsilon_; }
  void set_epsilon(double epsilon) { epsilon_ = epsilon; }
  double gamma() const { return gamma_; }

  NafNetwork& network() { return network_; }
  const NafNetwork& network() const { return network_; }
  NafNetwork& target_network() { return target_; }
  const NafNetwork& target_network() const { return target_; }
  AdamState& optimizer() { return optimizer_; }
  const AdamState& optimizer() const { return optimizer_; }
  ReplayMemory& memory() { return memory_; }
  const ReplayMemory& memory() const { return memory_; }

  /// Per-episode counters; the trainer resets them at episode start.
  AgentEpisodeMetrics& episode_stats() { return stats_; }
  const AgentEpisodeMetrics& episode_stats() const { return stats_; }

 private:
  struct PendingSample {
    Eigen::Vector4d observation;
    double control = 0.0;
    double reward = 0.0;
    Eigen::Vector4d next_observation;
    bool terminal = false;
    double learning_rate = 0.0;
  };

  std::size_t index_;
  double gamma_;
  double epsilon_;
  double epsilon_min_;
  double epsilon_decay_;
  double control_limit_;
  bool per_sample_updates_;
  bool independent_gate_draws_;
  TerParams ter_;
  ImpactParams impact_;
  NafNetwork network_;
  NafNetwork target_;
  AdamState optimizer_;
  ReplayMemory memory_;
  Rng act_rng_;
  Rng train_rng_;
  AgentEpisodeMetrics stats_;
  std::vector<PendingSample> pending_;
};

/// Checkpoint payload: both parameter sets, optimizer moments and the
/// agent's exploration state (binary layout in docs/formats.md).
struct AgentCheckpoint {
  std::uint32_t agent_label = 1;  // 1-based agent number
  NafConfig network;
  AdamConfig adam;
  double gamma = 0.999;
  double epsilon = 1.0;
  Eigen::VectorXd online_params;
  Eigen::VectorXd target_params;
  Eigen::VectorXd adam_first_moment;
  Eigen::VectorXd adam_second_moment;
  std::int64_t adam_step_count = 0;
};

void save_checkpoint(const AgentCheckpoint& checkpoint, const std::filesystem::path& path);
AgentCheckpoint load_checkpoint(const std::filesystem::path& path);

AgentCheckpoint make_checkpoint(const Agent& agent);

/// Rebuilds a network from a checkpoint's online parameters. Throws
/// std::runtime_error when the parameter block does not match the
/// architecture recorded in the header.
NafNetwork network_from_checkpoint(const AgentCheckpoint& checkpoint);

/// Restores network/target/optimizer/epsilon into an agent whose
/// configuration matches the checkpoint. Shape mismatches throw.
void restore_agent(Agent& agent, const AgentCheckpoint& checkpoint);

/// Drives the full decentralized training loop of a run: simultaneous
/// epsilon-greedy action selection, one environment step, per-agent storage
/// and learning, hard target syncs every target_period global steps, and
/// per-episode exploration decay.
class Trainer {
 public:
  explicit Trainer(const RunConfig& config);

  EpisodeMetrics run_episode();

  int episodes_run() const { return episodes_run_; }
  std::uint64_t global_step() const { return global_step_; }
  std::uint64_t sync_count() const { return sync_count_; }
  CartPoleEnv& env() { return env_; }
  std::vector<Agent>& agents() { return agents_; }
  const RunConfig& config() const { return config_; }

  /// Full artifact-producing run: writes the config snapshot, a metrics CSV
  /// (one row per episode), periodic checkpoints and final checkpoints into
  /// `out_dir`. On numerical divergence the run aborts with the last
  /// periodic checkpoints retained and the exception rethrown.
  static void train(const RunConfig& config, const std::filesystem::path& out_dir);

 private:
  RunConfig config_;
  CartPoleEnv env_;
  Rng env_rng_;
  std::vector<Agent> agents_;
  std::uint64_t global_step_ = 0;
  std::uint64_t sync_count_ = 0;
  int episodes_run_ = 0;
};

/// Metrics CSV column header for a run with `agents` learners.
std::string metrics_header(std::size_t agents);
/// One metrics CSV row (no trailing newline).
std::string metrics_row(const EpisodeMetrics& metrics);

}  // namespace coopcart
