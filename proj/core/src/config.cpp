#include "coopcart/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace coopcart {

namespace {

using nlohmann::json;

// Section-scoped reader that rejects keys the schema does not know.
class Section {
 public:
  Section(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object())
      throw ConfigError("config: " + path_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      target = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: " + qualify(key) + " has the wrong type");
    }
  }

  const json* subsection(const char* key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  std::string qualify(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : object_.items())
      if (!seen_.contains(key))
        throw ConfigError("config: unknown key " + qualify(key.c_str()));
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

RewardSpec reward_from_json(const json& j, const std::string& path) {
  Section section(j, path);
  RewardSpec spec;
  std::string role = "balance";
  section.read("role", role);
  if (role == "balance") {
    spec.role = RewardSpec::Role::kBalance;
  } else if (role == "position") {
    spec.role = RewardSpec::Role::kPosition;
  } else {
    throw ConfigError("config: " + path + ".role must be \"balance\" or \"position\"");
  }
  section.read("target", spec.target);
  std::vector<double> thresholds(spec.thresholds.begin(), spec.thresholds.end());
  std::vector<double> values(spec.values.begin(), spec.values.end());
  section.read("thresholds", thresholds);
  section.read("values", values);
  if (thresholds.size() != 3)
    throw ConfigError("config: " + path + ".thresholds must hold 3 entries");
  if (values.size() != 3)
    throw ConfigError("config: " + path + ".values must hold 3 entries");
  std::copy(thresholds.begin(), thresholds.end(), spec.thresholds.begin());
  std::copy(values.begin(), values.end(), spec.values.begin());
  section.read("alive_value", spec.alive_value);
  section.read("terminal_value", spec.terminal_value);
  section.finish();
  return spec;
}

json reward_to_json(const RewardSpec& spec) {
  json j;
  j["role"] = spec.role == RewardSpec::Role::kBalance ? "balance" : "position";
  j["target"] = spec.target;
  j["thresholds"] = spec.thresholds;
  j["values"] = spec.values;
  j["alive_value"] = spec.alive_value;
  j["terminal_value"] = spec.terminal_value;
  return j;
}

RunConfig config_from_json(const json& root) {
  RunConfig config;
  Section top(root, "");
  top.read("seed", config.seed);
  top.read("output_dir", config.output_dir);
  top.read("memory_capacity", config.memory_capacity);

  if (const json* env = top.subsection("env")) {
    Section section(*env, "env");
    section.read("gravity", config.env.physics.gravity);
    section.read("pole_mass", config.env.physics.pole_mass);
    section.read("cart_mass", config.env.physics.cart_mass);
    section.read("half_pole_length", config.env.physics.half_pole_length);
    section.read("force_clip", config.env.physics.force_clip);
    section.read("time_step", config.env.physics.time_step);
    section.read("control_limit", config.env.control_limit);
    section.read("position_limit", config.env.position_limit);
    section.read("angle_limit", config.env.angle_limit);
    section.read("reset_position_range", config.env.reset_position_range);
    section.read("reset_angle_range", config.env.reset_angle_range);
    section.read("max_episode_steps", config.env.max_episode_steps);
    if (const json* rewards = section.subsection("rewards")) {
      if (!rewards->is_array())
        throw ConfigError("config: env.rewards must be an array");
      config.env.rewards.clear();
      std::size_t index = 1;
      for (const json& entry : *rewards)
        config.env.rewards.push_back(
            reward_from_json(entry, "env.rewards[" + std::to_string(index++) + "]"));
    }
    section.finish();
  }

  if (const json* network = top.subsection("network")) {
    Section section(*network, "network");
    section.read("hidden_layers", config.network.hidden_layers);
    section.read("hidden_units", config.network.hidden_units);
    section.read("dropout", config.network.dropout);
    section.read("leaky_relu_slope", config.network.leaky_relu_slope);
    section.read("curvature_floor", config.network.curvature_floor);
    section.read("huber_delta", config.network.huber_delta);
    section.finish();
  }

  if (const json* adam = top.subsection("adam")) {
    Section section(*adam, "adam");
    section.read("beta1", config.adam.beta1);
    section.read("beta2", config.adam.beta2);
    section.read("epsilon", config.adam.epsilon);
    section.finish();
  }

  if (const json* replay = top.subsection("replay")) {
    Section section(*replay, "replay");
    section.read("macro_batch", config.replay.macro_batch);
    section.read("mini_batch", config.replay.mini_batch);
    section.read("priority_offset", config.replay.priority_offset);
    section.finish();
  }

  if (const json* impact = top.subsection("impact")) {
    Section section(*impact, "impact");
    section.read("threshold_high", config.impact.high_threshold);
    section.read("threshold_low", config.impact.low_threshold);
    section.read("rate_high", config.impact.high_rate);
    section.read("rate_mid", config.impact.mid_rate);
    section.read("rate_low", config.impact.low_rate);
    section.finish();
  }

  if (const json* training = top.subsection("training")) {
    Section section(*training, "training");
    section.read("episodes", config.training.episodes);
    section.read("gamma", config.training.gamma);
    section.read("epsilon_initial", config.training.epsilon_initial);
    section.read("epsilon_min", config.training.epsilon_min);
    section.read("epsilon_decay", config.training.epsilon_decay);
    section.read("target_period", config.training.target_period);
    section.read("per_sample_updates", config.training.per_sample_updates);
    section.read("independent_gate_draws", config.training.independent_gate_draws);
    section.read("checkpoint_period", config.training.checkpoint_period);
    section.finish();
  }

  top.finish();
  // The network clamps greedy controls to the environment's control range.
  config.network.input_dim = 4;
  config.network.control_limit = config.env.control_limit;
  return config;
}

json config_to_json(const RunConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["output_dir"] = config.output_dir;
  j["memory_capacity"] = config.memory_capacity;
  json& env = j["env"];
  env["gravity"] = config.env.physics.gravity;
  env["pole_mass"] = config.env.physics.pole_mass;
  env["cart_mass"] = config.env.physics.cart_mass;
  env["half_pole_length"] = config.env.physics.half_pole_length;
  env["force_clip"] = config.env.physics.force_clip;
  env["time_step"] = config.env.physics.time_step;
  env["control_limit"] = config.env.control_limit;
  env["position_limit"] = config.env.position_limit;
  env["angle_limit"] = config.env.angle_limit;
  env["reset_position_range"] = config.env.reset_position_range;
  env["reset_angle_range"] = config.env.reset_angle_range;
  env["max_episode_steps"] = config.env.max_episode_steps;
  env["rewards"] = json::array();
  for (const RewardSpec& spec : config.env.rewards)
    env["rewards"].push_back(reward_to_json(spec));
  json& network = j["network"];
  network["hidden_layers"] = config.network.hidden_layers;
  network["hidden_units"] = config.network.hidden_units;
  network["dropout"] = config.network.dropout;
  network["leaky_relu_slope"] = config.network.leaky_relu_slope;
  network["curvature_floor"] = config.network.curvature_floor;
  network["huber_delta"] = config.network.huber_delta;
  json& adam = j["adam"];
  adam["beta1"] = config.adam.beta1;
  adam["beta2"] = config.adam.beta2;
  adam["epsilon"] = config.adam.epsilon;
  json& replay = j["replay"];
  replay["macro_batch"] = config.replay.macro_batch;
  replay["mini_batch"] = config.replay.mini_batch;
  replay["priority_offset"] = config.replay.priority_offset;
  json& impact = j["impact"];
  impact["threshold_high"] = config.impact.high_threshold;
  impact["threshold_low"] = config.impact.low_threshold;
  impact["rate_high"] = config.impact.high_rate;
  impact["rate_mid"] = config.impact.mid_rate;
  impact["rate_low"] = config.impact.low_rate;
  json& training = j["training"];
  training["episodes"] = config.training.episodes;
  training["gamma"] = config.training.gamma;
  training["epsilon_initial"] = config.training.epsilon_initial;
  training["epsilon_min"] = config.training.epsilon_min;
  training["epsilon_decay"] = config.training.epsilon_decay;
  training["target_period"] = config.training.target_period;
  training["per_sample_updates"] = config.training.per_sample_updates;
  training["independent_gate_draws"] = config.training.independent_gate_draws;
  training["checkpoint_period"] = config.training.checkpoint_period;
  return j;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

void validate(const RunConfig& config) {
  const PhysicsParams& p = config.env.physics;
  require(p.pole_mass > 0, "env.pole_mass must be positive");
  require(p.cart_mass > 0, "env.cart_mass must be positive");
  require(p.half_pole_length > 0, "env.half_pole_length must be positive");
  require(p.force_clip > 0, "env.force_clip must be positive");
  require(p.time_step > 0, "env.time_step must be positive");
  require(config.env.control_limit > 0, "env.control_limit must be positive");
  require(config.env.position_limit > 0, "env.position_limit must be positive");
  require(config.env.angle_limit > 0, "env.angle_limit must be positive");
  require(config.env.reset_position_range >= 0 &&
              config.env.reset_position_range <= config.env.position_limit,
          "env.reset_position_range must lie in [0, position_limit]");
  require(config.env.reset_angle_range >= 0 &&
              config.env.reset_angle_range <= config.env.angle_limit,
          "env.reset_angle_range must lie in [0, angle_limit]");
  require(config.env.max_episode_steps >= 1, "env.max_episode_steps must be >= 1");
  require(config.env.rewards.size() >= 2, "env.rewards must define at least 2 agents");
  for (std::size_t i = 0; i < config.env.rewards.size(); ++i) {
    const RewardSpec& r = config.env.rewards[i];
    const std::string path = "env.rewards[" + std::to_string(i + 1) + "]";
    require(r.thresholds[0] > 0 && r.thresholds[0] < r.thresholds[1] &&
                r.thresholds[1] < r.thresholds[2],
            path + ".thresholds must be strictly increasing and positive");
  }

  require(config.network.hidden_layers >= 1, "network.hidden_layers must be >= 1");
  require(config.network.hidden_units >= 1, "network.hidden_units must be >= 1");
  require(config.network.dropout >= 0 && config.network.dropout < 1,
          "network.dropout must lie in [0, 1)");
  require(config.network.leaky_relu_slope >= 0 && config.network.leaky_relu_slope < 1,
          "network.leaky_relu_slope must lie in [0, 1)");
  require(config.network.curvature_floor > 0, "network.curvature_floor must be positive");
  require(config.network.huber_delta > 0, "network.huber_delta must be positive");

  require(config.adam.beta1 >= 0 && config.adam.beta1 < 1, "adam.beta1 must lie in [0, 1)");
  require(config.adam.beta2 >= 0 && config.adam.beta2 < 1, "adam.beta2 must lie in [0, 1)");
  require(config.adam.epsilon >= 0, "adam.epsilon must be non-negative");

  require(config.replay.mini_batch >= 1, "replay.mini_batch must be >= 1");
  require(config.replay.mini_batch < config.replay.macro_batch,
          "replay.mini_batch must be smaller than replay.macro_batch");
  require(static_cast<std::size_t>(config.replay.macro_batch) <= config.memory_capacity,
          "replay.macro_batch must not exceed memory_capacity");
  require(config.replay.priority_offset >= 0, "replay.priority_offset must be >= 0");

  require(config.impact.low_threshold >= 0 &&
              config.impact.low_threshold < config.impact.high_threshold &&
              config.impact.high_threshold <= 1,
          "impact thresholds must satisfy 0 <= low < high <= 1");
  require(config.impact.low_rate > 0 && config.impact.low_rate < config.impact.mid_rate &&
              config.impact.mid_rate < config.impact.high_rate &&
              config.impact.high_rate < 1,
          "impact rates must satisfy 0 < low < mid < high < 1");

  require(config.training.episodes >= 1, "training.episodes must be >= 1");
  require(config.training.gamma >= 0 && config.training.gamma < 1,
          "training.gamma must lie in [0, 1)");
  require(config.training.epsilon_min > 0 && config.training.epsilon_min <= 1,
          "training.epsilon_min must lie in (0, 1]");
  require(config.training.epsilon_initial >= config.training.epsilon_min &&
              config.training.epsilon_initial <= 1,
          "training.epsilon_initial must lie in [epsilon_min, 1]");
  require(config.training.epsilon_decay > 0 && config.training.epsilon_decay <= 1,
          "training.epsilon_decay must lie in (0, 1]");
  require(config.training.target_period >= 1, "training.target_period must be >= 1");
  require(config.training.checkpoint_period >= 0,
          "training.checkpoint_period must be >= 0");
}

RunConfig load_config(const std::string& source) {
  if (source == "default") {
    RunConfig config;
    validate(config);
    return config;
  }
  std::ifstream in(source);
  if (!in) throw ConfigError("config: cannot read file " + source);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig config = config_from_json_text(text.str());
  validate(config);
  return config;
}

std::string config_to_json_text(const RunConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

RunConfig config_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(root);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_config: cannot open " + path.string());
  out << config_to_json_text(config);
  if (!out) throw std::runtime_error("save_config: write failed for " + path.string());
}

std::filesystem::path resolve_output_dir(const std::string& output_dir) {
  std::filesystem::path path(output_dir);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("COOPCART_OUT_ROOT"); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / path;
  return path;
}

}  // namespace coopcart
