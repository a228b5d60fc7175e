#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "coopcart/config.hpp"
#include "coopcart/rollout.hpp"
#include "coopcart/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace coopcart;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> episodes;
  std::optional<std::int64_t> max_steps;
  std::optional<double> gamma;
  std::optional<double> epsilon_min;
  std::optional<double> epsilon_decay;
  std::optional<double> epsilon_initial;
  std::optional<std::int64_t> target_period;
  std::optional<int> macro_batch;
  std::optional<int> mini_batch;
  std::optional<double> priority_offset;
  std::optional<std::size_t> memory_capacity;
  std::optional<double> rate_high;
  std::optional<double> rate_mid;
  std::optional<double> rate_low;
  std::optional<double> threshold_high;
  std::optional<double> threshold_low;
  std::optional<int> checkpoint_period;
  std::optional<bool> per_sample_updates;
  std::optional<bool> independent_gate_draws;
};

void add_override_flags(CLI::App* cmd, Overrides& o, bool run_flags = false) {
  if (run_flags) {
    cmd->add_option("--seed", o.seed, "Master seed of the run");
    cmd->add_option("--out", o.output_dir,
                    "Output directory (relative paths resolve under $COOPCART_OUT_ROOT)");
    cmd->add_option("--episodes", o.episodes, "Number of training episodes");
  }
  cmd->add_option("--max-steps", o.max_steps, "Step limit per episode");
  cmd->add_option("--gamma", o.gamma, "Discount factor");
  cmd->add_option("--eps-min", o.epsilon_min, "Exploration floor");
  cmd->add_option("--eps-decay", o.epsilon_decay, "Per-episode exploration decay");
  cmd->add_option("--eps-initial", o.epsilon_initial, "Initial exploration rate");
  cmd->add_option("--target-period", o.target_period,
                  "Global steps between target-network syncs");
  cmd->add_option("--macro-batch", o.macro_batch, "Stage-1 sample size bound");
  cmd->add_option("--mini-batch", o.mini_batch, "Stage-2 (returned) sample size");
  cmd->add_option("--priority-offset", o.priority_offset,
                  "Additive temporal-priority offset");
  cmd->add_option("--memory", o.memory_capacity, "Replay memory capacity");
  cmd->add_option("--rate-high", o.rate_high, "High-impact learning rate");
  cmd->add_option("--rate-mid", o.rate_mid, "Conflicting mid-impact learning rate");
  cmd->add_option("--rate-low", o.rate_low, "Low-impact / imagined learning rate");
  cmd->add_option("--threshold-high", o.threshold_high, "Upper impact threshold");
  cmd->add_option("--threshold-low", o.threshold_low, "Lower impact threshold");
  cmd->add_option("--checkpoint-period", o.checkpoint_period,
                  "Episodes between periodic checkpoints (0 = final only)");
  cmd->add_option("--per-sample-updates", o.per_sample_updates,
                  "One optimizer step per sample instead of per rate bucket");
  cmd->add_option("--independent-gate-draws", o.independent_gate_draws,
                  "Draw the two imagination gates independently");
}

RunConfig build_config(const std::string& source, const Overrides& o) {
  RunConfig config = load_config(source);
  if (o.seed) config.seed = *o.seed;
  if (o.output_dir) config.output_dir = *o.output_dir;
  if (o.episodes) config.training.episodes = *o.episodes;
  if (o.max_steps) config.env.max_episode_steps = *o.max_steps;
  if (o.gamma) config.training.gamma = *o.gamma;
  if (o.epsilon_min) config.training.epsilon_min = *o.epsilon_min;
  if (o.epsilon_decay) config.training.epsilon_decay = *o.epsilon_decay;
  if (o.epsilon_initial) config.training.epsilon_initial = *o.epsilon_initial;
  if (o.target_period) config.training.target_period = *o.target_period;
  if (o.macro_batch) config.replay.macro_batch = *o.macro_batch;
  if (o.mini_batch) config.replay.mini_batch = *o.mini_batch;
  if (o.priority_offset) config.replay.priority_offset = *o.priority_offset;
  if (o.memory_capacity) config.memory_capacity = *o.memory_capacity;
  if (o.rate_high) config.impact.high_rate = *o.rate_high;
  if (o.rate_mid) config.impact.mid_rate = *o.rate_mid;
  if (o.rate_low) config.impact.low_rate = *o.rate_low;
  if (o.threshold_high) config.impact.high_threshold = *o.threshold_high;
  if (o.threshold_low) config.impact.low_threshold = *o.threshold_low;
  if (o.checkpoint_period) config.training.checkpoint_period = *o.checkpoint_period;
  if (o.per_sample_updates) config.training.per_sample_updates = *o.per_sample_updates;
  if (o.independent_gate_draws)
    config.training.independent_gate_draws = *o.independent_gate_draws;
  validate(config);
  return config;
}

std::vector<NafNetwork> networks_from_checkpoints(const std::vector<std::string>& paths,
                                                  std::size_t expected) {
  if (paths.size() != expected)
    throw std::runtime_error("expected " + std::to_string(expected) +
                             " checkpoints (one per agent), got " +
                             std::to_string(paths.size()));
  std::vector<NafNetwork> networks;
  networks.reserve(paths.size());
  for (const std::string& path : paths)
    networks.push_back(network_from_checkpoint(load_checkpoint(path)));
  return networks;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path.string());
  return out;
}

int cmd_train(const std::string& config_source, const Overrides& overrides) {
  const RunConfig config = build_config(config_source, overrides);
  const fs::path out_dir = resolve_output_dir(config.output_dir);
  std::cout << "training " << config.num_agents() << " agents for "
            << config.training.episodes << " episodes (seed " << config.seed << ") -> "
            << out_dir.string() << "\n";
  Trainer::train(config, out_dir);
  std::cout << "done; metrics in " << (out_dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_source, const Overrides& overrides,
             const std::vector<std::string>& checkpoints, int episodes,
             std::uint64_t seed, const std::string& out_file) {
  const RunConfig config = build_config(config_source, overrides);
  const auto networks = networks_from_checkpoints(checkpoints, config.num_agents());
  const EvalSummary summary = evaluate_greedy(config.env, networks, episodes, seed);

  std::string text = "episodes=" + std::to_string(summary.episodes) + "\nmean_length=";
  {
    char buffer[40];
    auto fmt = [&buffer](double v) {
      const auto r = std::to_chars(buffer, buffer + sizeof(buffer), v);
      return std::string(buffer, r.ptr);
    };
    text += fmt(summary.mean_length) + "\n";
    for (std::size_t i = 0; i < summary.mean_returns.size(); ++i)
      text += "mean_return_" + std::to_string(i + 1) + "=" +
              fmt(summary.mean_returns[i]) + "\n";
  }
  std::cout << text;
  auto out = open_output(resolve_output_dir(out_file));
  out << text;
  return 0;
}

int cmd_export_surface(const std::string& config_source, const Overrides& overrides,
                       const std::string& checkpoint, const ValueSurfaceSpec& spec,
                       const std::string& out_file) {
  build_config(config_source, overrides);  // validates the run description
  const NafNetwork network = network_from_checkpoint(load_checkpoint(checkpoint));
  auto out = open_output(resolve_output_dir(out_file));
  export_value_surface(network, spec, out);
  return 0;
}

int cmd_export_trajectory(const std::string& config_source, const Overrides& overrides,
                          const std::vector<std::string>& checkpoints,
                          const CartPoleState& initial, int steps,
                          const std::string& out_file) {
  const RunConfig config = build_config(config_source, overrides);
  const auto networks = networks_from_checkpoints(checkpoints, config.num_agents());
  auto out = open_output(resolve_output_dir(out_file));
  export_trajectory(config.env, networks, initial, steps, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coopcart: decentralized two-agent cart-pole reinforcement learning"};
  app.require_subcommand(1);

  std::string config_source = "default";
  Overrides overrides;

  auto* train = app.add_subcommand("train", "Run a seeded training run");
  train->add_option("--config", config_source, "Config JSON path or \"default\"");
  add_override_flags(train, overrides, /*run_flags=*/true);

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of trained checkpoints");
  std::vector<std::string> eval_checkpoints;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 1;
  std::string eval_out = "eval_summary.txt";
  eval->add_option("--config", config_source, "Config JSON path or \"default\"");
  eval->add_option("--checkpoints", eval_checkpoints, "Checkpoint files, one per agent")
      ->required()
      ->expected(-1);
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--out", eval_out, "Summary file");
  add_override_flags(eval, overrides);

  auto* surface =
      app.add_subcommand("export-value-surface", "State-value grid for one agent");
  std::string surface_checkpoint;
  ValueSurfaceSpec surface_spec;
  std::string surface_out = "value_surface.csv";
  surface->add_option("--config", config_source, "Config JSON path or \"default\"");
  surface->add_option("--checkpoint", surface_checkpoint, "Agent checkpoint")->required();
  surface->add_option("--position-min", surface_spec.position_min);
  surface->add_option("--position-max", surface_spec.position_max);
  surface->add_option("--position-count", surface_spec.position_count);
  surface->add_option("--angle-min", surface_spec.angle_min);
  surface->add_option("--angle-max", surface_spec.angle_max);
  surface->add_option("--angle-count", surface_spec.angle_count);
  surface->add_option("--velocity-range", surface_spec.velocity_range);
  surface->add_option("--velocity-count", surface_spec.velocity_count);
  surface->add_option("--out", surface_out, "Output CSV");
  add_override_flags(surface, overrides);

  auto* trajectory =
      app.add_subcommand("export-trajectory", "Greedy rollout from a fixed state");
  std::vector<std::string> trajectory_checkpoints;
  CartPoleState initial;
  int trajectory_steps = 3000;
  std::string trajectory_out = "trajectory.csv";
  trajectory->add_option("--config", config_source, "Config JSON path or \"default\"");
  trajectory
      ->add_option("--checkpoints", trajectory_checkpoints,
                   "Checkpoint files, one per agent")
      ->required()
      ->expected(-1);
  trajectory->add_option("--position", initial.position, "Initial cart position");
  trajectory->add_option("--velocity", initial.velocity, "Initial cart velocity");
  trajectory->add_option("--angle", initial.angle, "Initial pole angle");
  trajectory->add_option("--angular-velocity", initial.angular_velocity,
                         "Initial pole angular velocity");
  trajectory->add_option("--steps", trajectory_steps, "Maximum steps to roll");
  trajectory->add_option("--out", trajectory_out, "Output CSV");
  add_override_flags(trajectory, overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(config_source, overrides);
    if (eval->parsed())
      return cmd_eval(config_source, overrides, eval_checkpoints, eval_episodes,
                      eval_seed, eval_out);
    if (surface->parsed())
      return cmd_export_surface(config_source, overrides, surface_checkpoint,
                                surface_spec, surface_out);
    if (trajectory->parsed())
      return cmd_export_trajectory(config_source, overrides, trajectory_checkpoints,
                                   initial, trajectory_steps, trajectory_out);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
