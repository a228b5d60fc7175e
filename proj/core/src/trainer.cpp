#include "coopcart/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "textio.hpp"

namespace coopcart {

namespace {

// Seed-stream layout of a run. Each consumer owns a stream so that draw
// counts in one component cannot shift another component's sequence.
constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kAgentInitStream = 100;
constexpr std::uint64_t kAgentActStream = 200;
constexpr std::uint64_t kAgentTrainStream = 300;

}  // namespace

Agent::Agent(std::size_t index, const RunConfig& config, Rng init_rng, Rng act_rng,
             Rng train_rng)
    : index_(index),
      gamma_(config.training.gamma),
      epsilon_(config.training.epsilon_initial),
      epsilon_min_(config.training.epsilon_min),
      epsilon_decay_(config.training.epsilon_decay),
      control_limit_(config.env.control_limit),
      per_sample_updates_(config.training.per_sample_updates),
      independent_gate_draws_(config.training.independent_gate_draws),
      ter_(config.replay),
      impact_(config.impact),
      network_(config.network, init_rng),
      target_(network_),
      optimizer_(network_.parameter_count(), config.adam),
      memory_(config.memory_capacity),
      act_rng_(act_rng),
      train_rng_(train_rng) {}

double Agent::act(const CartPoleState& state) {
  if (act_rng_.uniform() < epsilon_)
    return act_rng_.uniform(-control_limit_, control_limit_);
  return network_.greedy_control(state.observation());
}

void Agent::store(const CartPoleState& state, const JointControl& joint_control,
                  double own_reward, const CartPoleState& next_state, bool terminal,
                  std::uint64_t global_step) {
  Experience e;
  e.state = state;
  e.joint_control = joint_control;
  e.reward = own_reward;
  e.next_state = next_state;
  e.terminal = terminal;
  e.collect_step = global_step;
  e.collect_epsilon = epsilon_;
  memory_.push(std::move(e));
}

void Agent::learn(const CartPoleEnv& model, std::uint64_t global_step) {
  const auto picks = sample_ter(memory_, ter_, epsilon_, global_step, train_rng_);
  if (!picks) {
    ++stats_.skipped_updates;
    return;
  }
  stats_.sampled += picks->size();

  pending_.clear();
  pending_.reserve(picks->size() * 5);

  const auto push_imagined = [this](const ImaginedExperience& imagined, double rate) {
    pending_.push_back({imagined.state.observation(), imagined.control, imagined.reward,
                        imagined.next_state.observation(), imagined.terminal, rate});
  };

  for (const std::uint32_t pick : *picks) {
    const Experience& e = memory_[pick];

    // One shared uniform gates both imagination mechanisms: marginal solo
    // experiences fire with the collection-time exploration rate, the
    // coordination scenarios with its complement, so the two never co-occur
    // for one sample unless independent draws are configured.
    const double w = train_rng_.uniform();
    if (w < e.collect_epsilon) {
      push_imagined(imagine_marginal(model, e.state, index_, e.joint_control),
                    impact_.low_rate);
      ++stats_.marginal;
    }

    const double impact = impact_factor(index_, e.joint_control);
    const int sign = coordination_coefficient(index_, e.joint_control);
    const TierSelection selection = select_tier(impact, sign, impact_);
    switch (selection.tier) {
      case ImpactTier::kHigh: ++stats_.tier_high; break;
      case ImpactTier::kMidCooperative: ++stats_.tier_mid_coop; break;
      case ImpactTier::kMidConflicting: ++stats_.tier_mid_conflict; break;
      case ImpactTier::kLow: ++stats_.tier_low; break;
    }
    pending_.push_back({e.state.observation(), e.joint_control[index_], e.reward,
                        e.next_state.observation(), e.terminal,
                        selection.learning_rate});

    if (selection.simulate_coordination) {
      const bool coordinate = independent_gate_draws_
                                  ? e.collect_epsilon < train_rng_.uniform()
                                  : e.collect_epsilon < w;
      if (coordinate) {
        push_imagined(imagine_idle(model, e.state, index_, e.joint_control),
                      impact_.low_rate);
        push_imagined(imagine_coop1(model, e.state, index_, e.joint_control),
                      impact_.low_rate);
        push_imagined(imagine_coop2(model, e.state, index_, e.joint_control),
                      impact_.low_rate);
        ++stats_.coordination_events;
      }
    }
  }

  const Eigen::Index count = static_cast<Eigen::Index>(pending_.size());

  // Bootstrap values for all non-terminal successors in one evaluation-mode
  // pass through the target network.
  Eigen::Index bootstrap_count = 0;
  for (const PendingSample& p : pending_)
    if (!p.terminal) ++bootstrap_count;
  Eigen::MatrixXd successors(4, bootstrap_count);
  Eigen::Index slot = 0;
  for (const PendingSample& p : pending_)
    if (!p.terminal) successors.col(slot++) = p.next_observation;
  Eigen::VectorXd bootstrap;
  if (bootstrap_count > 0) bootstrap = target_.value_batch(successors);

  UpdateBatch batch;
  batch.states.resize(4, count);
  batch.controls.resize(count);
  batch.targets.resize(count);
  batch.learning_rates.resize(count);
  slot = 0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const PendingSample& p = pending_[static_cast<std::size_t>(i)];
    batch.states.col(i) = p.observation;
    batch.controls(i) = p.control;
    batch.targets(i) = p.terminal ? p.reward : p.reward + gamma_ * bootstrap(slot++);
    batch.learning_rates(i) = p.learning_rate;
  }

  const UpdateResult result =
      network_.update(optimizer_, batch, &train_rng_, per_sample_updates_);
  stats_.update_samples += static_cast<std::uint64_t>(result.samples);
  stats_.optimizer_steps += static_cast<std::uint64_t>(result.optimizer_steps);
  stats_.mean_loss += result.mean_loss * static_cast<double>(result.samples);
}

void Agent::sync_target() { target_ = network_; }

void Agent::decay_epsilon() {
  epsilon_ = std::max(epsilon_decay_ * epsilon_, epsilon_min_);
}

Trainer::Trainer(const RunConfig& config)
    : config_(config),
      env_(config.env),
      env_rng_(derive_seed(config.seed, kEnvStream)) {
  validate(config_);
  agents_.reserve(config_.num_agents());
  for (std::size_t i = 0; i < config_.num_agents(); ++i)
    agents_.emplace_back(i, config_,
                         Rng(derive_seed(config_.seed, kAgentInitStream + i)),
                         Rng(derive_seed(config_.seed, kAgentActStream + i)),
                         Rng(derive_seed(config_.seed, kAgentTrainStream + i)));
}

EpisodeMetrics Trainer::run_episode() {
  const std::size_t n = agents_.size();
  env_.reset(env_rng_);

  EpisodeMetrics metrics;
  metrics.episode = episodes_run_ + 1;
  metrics.epsilon = agents_.front().epsilon();
  metrics.agents.resize(n);
  std::vector<double> discount(n, 1.0);
  for (Agent& agent : agents_) agent.episode_stats() = AgentEpisodeMetrics{};

  JointControl controls(n);
  while (env_.episode_live()) {
    // All agents pick controls from the same state; nobody sees the others'
    // current choice.
    const CartPoleState state = env_.state();
    for (std::size_t i = 0; i < n; ++i) controls[i] = agents_[i].act(state);

    const StepResult result = env_.step(controls);
    ++global_step_;
    ++metrics.length;

    for (std::size_t i = 0; i < n; ++i) {
      agents_[i].store(state, controls, result.rewards[i], result.next,
                       result.terminated, global_step_);
      metrics.agents[i].undiscounted_return += result.rewards[i];
      metrics.agents[i].discounted_return += discount[i] * result.rewards[i];
      discount[i] *= agents_[i].gamma();
    }
    for (std::size_t i = 0; i < n; ++i) agents_[i].learn(env_, global_step_);

    if (global_step_ % static_cast<std::uint64_t>(config_.training.target_period) == 0) {
      for (Agent& agent : agents_) agent.sync_target();
      ++sync_count_;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const AgentEpisodeMetrics& stats = agents_[i].episode_stats();
    const double returns_u = metrics.agents[i].undiscounted_return;
    const double returns_d = metrics.agents[i].discounted_return;
    metrics.agents[i] = stats;
    metrics.agents[i].undiscounted_return = returns_u;
    metrics.agents[i].discounted_return = returns_d;
    if (stats.update_samples > 0)
      metrics.agents[i].mean_loss =
          stats.mean_loss / static_cast<double>(stats.update_samples);
  }

  for (Agent& agent : agents_) agent.decay_epsilon();
  ++episodes_run_;
  return metrics;
}

std::string metrics_header(std::size_t agents) {
  std::string header = "episode,length,epsilon";
  for (std::size_t i = 1; i <= agents; ++i) {
    const std::string tag = "_" + std::to_string(i);
    for (const char* column :
         {"return", "mean_loss", "sampled", "up_high", "up_mid_coop",
          "up_mid_conflict", "up_low", "up_marginal", "coord_events"})
      header += "," + std::string(column) + tag;
  }
  return header;
}

std::string metrics_row(const EpisodeMetrics& metrics) {
  using detail::to_text;
  std::string row = to_text(metrics.episode);
  row += "," + to_text(metrics.length);
  row += "," + to_text(metrics.epsilon);
  for (const AgentEpisodeMetrics& a : metrics.agents) {
    row += "," + to_text(a.undiscounted_return);
    row += "," + to_text(a.mean_loss);
    row += "," + to_text(a.sampled);
    row += "," + to_text(a.tier_high);
    row += "," + to_text(a.tier_mid_coop);
    row += "," + to_text(a.tier_mid_conflict);
    row += "," + to_text(a.tier_low);
    row += "," + to_text(a.marginal);
    row += "," + to_text(a.coordination_events);
  }
  return row;
}

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'C', 'Q', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd read_vector(std::ifstream& in, Eigen::Index n) {
  Eigen::VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  return v;
}

std::string checkpoint_name(std::size_t agent_index, const std::string& tag) {
  return "agent" + std::to_string(agent_index + 1) + "_" + tag + ".ckpt";
}

}  // namespace

void save_checkpoint(const AgentCheckpoint& checkpoint,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_raw(out, kCheckpointVersion);
  write_raw(out, checkpoint.agent_label);
  write_raw(out, static_cast<std::int32_t>(checkpoint.network.input_dim));
  write_raw(out, static_cast<std::int32_t>(checkpoint.network.hidden_layers));
  write_raw(out, static_cast<std::int32_t>(checkpoint.network.hidden_units));
  write_raw(out, checkpoint.network.dropout);
  write_raw(out, checkpoint.network.leaky_relu_slope);
  write_raw(out, checkpoint.network.curvature_floor);
  write_raw(out, checkpoint.network.control_limit);
  write_raw(out, checkpoint.network.huber_delta);
  write_raw(out, checkpoint.adam.beta1);
  write_raw(out, checkpoint.adam.beta2);
  write_raw(out, checkpoint.adam.epsilon);
  write_raw(out, checkpoint.gamma);
  write_raw(out, checkpoint.epsilon);
  write_raw(out, static_cast<std::uint64_t>(checkpoint.online_params.size()));
  write_vector(out, checkpoint.online_params);
  write_vector(out, checkpoint.target_params);
  write_vector(out, checkpoint.adam_first_moment);
  write_vector(out, checkpoint.adam_second_moment);
  write_raw(out, checkpoint.adam_step_count);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

AgentCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: " + path.string() +
                             " is not an agent checkpoint");
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));

  AgentCheckpoint c;
  c.agent_label = read_raw<std::uint32_t>(in);
  c.network.input_dim = read_raw<std::int32_t>(in);
  c.network.hidden_layers = read_raw<std::int32_t>(in);
  c.network.hidden_units = read_raw<std::int32_t>(in);
  c.network.dropout = read_raw<double>(in);
  c.network.leaky_relu_slope = read_raw<double>(in);
  c.network.curvature_floor = read_raw<double>(in);
  c.network.control_limit = read_raw<double>(in);
  c.network.huber_delta = read_raw<double>(in);
  c.adam.beta1 = read_raw<double>(in);
  c.adam.beta2 = read_raw<double>(in);
  c.adam.epsilon = read_raw<double>(in);
  c.gamma = read_raw<double>(in);
  c.epsilon = read_raw<double>(in);
  const auto count = static_cast<Eigen::Index>(read_raw<std::uint64_t>(in));
  c.online_params = read_vector(in, count);
  c.target_params = read_vector(in, count);
  c.adam_first_moment = read_vector(in, count);
  c.adam_second_moment = read_vector(in, count);
  c.adam_step_count = read_raw<std::int64_t>(in);
  if (!in)
    throw std::runtime_error("load_checkpoint: truncated checkpoint " + path.string());
  return c;
}

AgentCheckpoint make_checkpoint(const Agent& agent) {
  AgentCheckpoint c;
  c.agent_label = static_cast<std::uint32_t>(agent.index() + 1);
  c.network = agent.network().config();
  c.adam = agent.optimizer().config();
  c.gamma = agent.gamma();
  c.epsilon = agent.epsilon();
  c.online_params = agent.network().parameters();
  c.target_params = agent.target_network().parameters();
  c.adam_first_moment = agent.optimizer().first_moment();
  c.adam_second_moment = agent.optimizer().second_moment();
  c.adam_step_count = agent.optimizer().step_count();
  return c;
}

NafNetwork network_from_checkpoint(const AgentCheckpoint& checkpoint) {
  Rng scratch(0);
  NafNetwork network(checkpoint.network, scratch);
  if (network.parameter_count() != checkpoint.online_params.size())
    throw std::runtime_error(
        "checkpoint shape mismatch: architecture implies " +
        std::to_string(network.parameter_count()) + " parameters, file holds " +
        std::to_string(checkpoint.online_params.size()));
  network.set_parameters(checkpoint.online_params);
  return network;
}

void restore_agent(Agent& agent, const AgentCheckpoint& checkpoint) {
  if (agent.network().parameter_count() != checkpoint.online_params.size())
    throw std::runtime_error(
        "checkpoint shape mismatch: agent has " +
        std::to_string(agent.network().parameter_count()) + " parameters, file holds " +
        std::to_string(checkpoint.online_params.size()));
  agent.network().set_parameters(checkpoint.online_params);
  agent.target_network().set_parameters(checkpoint.target_params);
  agent.optimizer().restore(checkpoint.adam_first_moment, checkpoint.adam_second_moment,
                            checkpoint.adam_step_count);
  agent.set_epsilon(checkpoint.epsilon);
}

void Trainer::train(const RunConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  save_config(config, out_dir / "config.json");

  std::ofstream metrics(out_dir / "metrics.csv", std::ios::binary);
  if (!metrics)
    throw std::runtime_error("Trainer::train: cannot open metrics log in " +
                             out_dir.string());
  metrics << metrics_header(config.num_agents()) << "\n";

  Trainer trainer(config);
  const auto write_checkpoints = [&](const std::string& tag) {
    for (const Agent& agent : trainer.agents())
      save_checkpoint(make_checkpoint(agent), out_dir / checkpoint_name(agent.index(), tag));
  };

  const int period = config.training.checkpoint_period;
  try {
    for (int episode = 1; episode <= config.training.episodes; ++episode) {
      const EpisodeMetrics m = trainer.run_episode();
      metrics << metrics_row(m) << "\n";
      if (period > 0 && episode % period == 0) {
        std::ostringstream tag;
        tag << "ep" << std::setw(6) << std::setfill('0') << episode;
        write_checkpoints(tag.str());
      }
    }
  } catch (const DivergenceError&) {
    metrics.flush();
    throw;  // last periodic checkpoints remain on disk
  }
  write_checkpoints("final");
  metrics.flush();
  if (!metrics)
    throw std::runtime_error("Trainer::train: metrics log write failed in " +
                             out_dir.string());
}

}  // namespace coopcart
