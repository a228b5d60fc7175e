#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "coopcart/env.hpp"
#include "coopcart/impact.hpp"
#include "coopcart/qnet.hpp"
#include "coopcart/replay.hpp"

namespace coopcart {

/// Invalid configuration input (bad value, unknown key, missing file).
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Episode- and update-loop parameters.
struct TrainParams {
  int episodes = 2000;
  double gamma = 0.999;
  double epsilon_initial = 1.0;
  double epsilon_min = 0.01;
  double epsilon_decay = 0.999;          // per-episode multiplicative decay
  std::int64_t target_period = 4000;     // hard target-network sync, in global steps
  bool per_sample_updates = false;       // one Adam step per sample instead of per bucket
  bool independent_gate_draws = false;   // separate uniforms for the two imagination gates
  int checkpoint_period = 500;           // episodes between periodic checkpoints; 0 = final only
};

/// Complete description of a run. Defaults reproduce the reference
/// hyperparameter tables. JSON layout mirrors this struct one to one
/// (see docs/formats.md); unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  EnvConfig env;              // includes per-agent reward specs and the step limit
  NafConfig network;          // control_limit is taken from env, not the file
  AdamConfig adam;
  TerParams replay;
  std::size_t memory_capacity = 100000;
  ImpactParams impact;
  TrainParams training;

  std::size_t num_agents() const { return env.num_agents(); }
};

/// Throws ConfigError naming the offending field when any invariant fails.
void validate(const RunConfig& config);

/// Loads and validates a config. `source` is a JSON file path, or the
/// literal string "default" for the built-in defaults.
RunConfig load_config(const std::string& source);

/// Serializes (sorted keys, 2-space indent); load_config(save_config(c)) is
/// the identity.
void save_config(const RunConfig& config, const std::filesystem::path& path);
std::string config_to_json_text(const RunConfig& config);
RunConfig config_from_json_text(const std::string& text);

/// Resolves an output directory against the COOPCART_OUT_ROOT environment
/// variable: relative paths are joined to the root when it is set, absolute
/// paths and unset root pass through.
std::filesystem::path resolve_output_dir(const std::string& output_dir);

}  // namespace coopcart
