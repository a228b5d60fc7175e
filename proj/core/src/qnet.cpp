#include "coopcart/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace coopcart {

namespace {

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

AdamState::AdamState(Eigen::Index parameter_count, AdamConfig config)
    : config_(config),
      first_moment_(Eigen::VectorXd::Zero(parameter_count)),
      second_moment_(Eigen::VectorXd::Zero(parameter_count)) {}

void AdamState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                     double learning_rate) {
  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  first_moment_ = b1 * first_moment_ + (1.0 - b1) * grad;
  second_moment_ =
      (b2 * second_moment_.array() + (1.0 - b2) * grad.array().square()).matrix();

  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  const auto mean = first_moment_.array() / correction1;
  const Eigen::ArrayXd denom =
      (second_moment_.array() / correction2).sqrt() + config_.epsilon;
  params.array() -= learning_rate * (denom > 0.0).select(mean / denom, 0.0);
}

void AdamState::restore(Eigen::VectorXd first_moment, Eigen::VectorXd second_moment,
                        std::int64_t step_count) {
  if (first_moment.size() != first_moment_.size() ||
      second_moment.size() != second_moment_.size())
    throw std::invalid_argument("AdamState::restore: moment size mismatch");
  first_moment_ = std::move(first_moment);
  second_moment_ = std::move(second_moment);
  step_count_ = step_count;
}

struct NafNetwork::Trunk {
  std::vector<Eigen::MatrixXd> preactivations;  // z_l, one per hidden layer
  std::vector<Eigen::MatrixXd> activations;     // a_0 = input, then post-dropout outputs
  std::vector<Eigen::MatrixXd> dropout_masks;   // scaled masks, empty in eval mode
};

NafNetwork::NafNetwork(const NafConfig& config, Rng& init_rng) : config_(config) {
  if (config_.input_dim < 1 || config_.hidden_layers < 1 || config_.hidden_units < 1)
    throw std::invalid_argument("NafNetwork: invalid architecture");

  const std::size_t layer_count = static_cast<std::size_t>(config_.hidden_layers) + 3;
  weights_.resize(layer_count);
  biases_.resize(layer_count);

  Eigen::Index offset = 0;
  Eigen::Index in_dim = config_.input_dim;
  for (std::size_t l = 0; l < layer_count; ++l) {
    const bool is_head = l >= static_cast<std::size_t>(config_.hidden_layers);
    const Eigen::Index out_dim = is_head ? 1 : config_.hidden_units;
    weights_[l] = {offset, out_dim, in_dim};
    offset += out_dim * in_dim;
    biases_[l] = {offset, out_dim, 1};
    offset += out_dim;
    if (!is_head) in_dim = config_.hidden_units;
  }
  params_.resize(offset);

  for (std::size_t l = 0; l < layer_count; ++l) {
    const bool is_head = l >= static_cast<std::size_t>(config_.hidden_layers);
    double* w = params_.data() + weights_[l].offset;
    const Eigen::Index w_count = weights_[l].rows * weights_[l].cols;
    if (is_head) {
      for (Eigen::Index i = 0; i < w_count; ++i) w[i] = init_rng.uniform(-1.0, 1.0);
      double* b = params_.data() + biases_[l].offset;
      for (Eigen::Index i = 0; i < biases_[l].rows; ++i) b[i] = init_rng.uniform(-1.0, 1.0);
    } else {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(weights_[l].rows + weights_[l].cols));
      for (Eigen::Index i = 0; i < w_count; ++i)
        w[i] = std::clamp(init_rng.uniform(-bound, bound), -0.5, 0.5);
      params_.segment(biases_[l].offset, biases_[l].rows).setZero();
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> NafNetwork::weight(std::size_t layer) const {
  const TensorSpan& s = weights_[layer];
  return {params_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::VectorXd> NafNetwork::bias(std::size_t layer) const {
  const TensorSpan& s = biases_[layer];
  return {params_.data() + s.offset, s.rows};
}

void NafNetwork::forward_heads(const Eigen::MatrixXd& states, Rng* dropout_rng,
                               Trunk* cache, Eigen::RowVectorXd& value,
                               Eigen::RowVectorXd& mean,
                               Eigen::RowVectorXd& curvature_raw) const {
  if (states.rows() != config_.input_dim)
    throw std::invalid_argument("NafNetwork: observation has " +
                                std::to_string(states.rows()) + " rows, expected " +
                                std::to_string(config_.input_dim));

  const std::size_t hidden = static_cast<std::size_t>(config_.hidden_layers);
  const double slope = config_.leaky_relu_slope;
  const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;
  const double keep = 1.0 - config_.dropout;

  if (cache) {
    cache->preactivations.clear();
    cache->activations.clear();
    cache->dropout_masks.clear();
    cache->activations.push_back(states);
  }

  Eigen::MatrixXd activation = states;
  for (std::size_t l = 0; l < hidden; ++l) {
    Eigen::MatrixXd z = (weight(l) * activation).colwise() + bias(l);
    if (cache) cache->preactivations.push_back(z);
    activation = z.array().max(z.array() * slope).matrix();
    if (use_dropout) {
      Eigen::MatrixXd mask(activation.rows(), activation.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          mask(r, c) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      activation.array() *= mask.array();
      if (cache) cache->dropout_masks.push_back(std::move(mask));
    }
    if (cache) cache->activations.push_back(activation);
  }

  value = (weight(hidden) * activation).colwise() + bias(hidden);
  mean = (weight(hidden + 1) * activation).colwise() + bias(hidden + 1);
  curvature_raw = (weight(hidden + 2) * activation).colwise() + bias(hidden + 2);
}

NafNetwork::Heads NafNetwork::heads(const Eigen::VectorXd& observation) const {
  Eigen::RowVectorXd v, mu, c;
  forward_heads(observation, nullptr, nullptr, v, mu, c);
  return {v(0), mu(0), softplus(c(0)) + config_.curvature_floor};
}

double NafNetwork::value(const Eigen::VectorXd& observation) const {
  return heads(observation).value;
}

double NafNetwork::q_value(const Eigen::VectorXd& observation, double control) const {
  const Heads h = heads(observation);
  const double d = control - h.mean;
  // Same association as the batched forward pass, so evaluation and training
  // compute bit-identical Q values.
  return h.value - (0.5 * h.curvature) * (d * d);
}

double NafNetwork::greedy_control(const Eigen::VectorXd& observation) const {
  return std::clamp(heads(observation).mean, -config_.control_limit,
                    config_.control_limit);
}

Eigen::VectorXd NafNetwork::value_batch(const Eigen::MatrixXd& observations) const {
  Eigen::RowVectorXd v, mu, c;
  forward_heads(observations, nullptr, nullptr, v, mu, c);
  return v.transpose();
}

Eigen::VectorXd NafNetwork::q_value_batch(const Eigen::MatrixXd& observations,
                                          const Eigen::VectorXd& controls) const {
  if (observations.cols() != controls.size())
    throw std::invalid_argument("NafNetwork::q_value_batch: batch size mismatch");
  Eigen::RowVectorXd v, mu, raw;
  forward_heads(observations, nullptr, nullptr, v, mu, raw);
  Eigen::VectorXd q(controls.size());
  for (Eigen::Index i = 0; i < controls.size(); ++i) {
    const double p = softplus(raw(i)) + config_.curvature_floor;
    const double d = controls(i) - mu(i);
    q(i) = v(i) - (0.5 * p) * (d * d);
  }
  return q;
}

double NafNetwork::loss_and_grad(const Eigen::MatrixXd& states,
                                 const Eigen::VectorXd& controls,
                                 const Eigen::VectorXd& targets,
                                 Eigen::VectorXd& grad_out, Rng* dropout_rng) const {
  const Eigen::Index n = controls.size();
  if (states.cols() != n || targets.size() != n)
    throw std::invalid_argument("NafNetwork::loss_and_grad: batch size mismatch");
  if (n == 0) {
    grad_out = Eigen::VectorXd::Zero(params_.size());
    return 0.0;
  }

  Trunk cache;
  Eigen::RowVectorXd value, mean, curvature_raw;
  forward_heads(states, dropout_rng, &cache, value, mean, curvature_raw);

  Eigen::ArrayXd curvature(n), curve_sigmoid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    curvature(i) = softplus(curvature_raw(i)) + config_.curvature_floor;
    curve_sigmoid(i) = sigmoid(curvature_raw(i));
  }
  const Eigen::ArrayXd diff = controls.array() - mean.transpose().array();
  const Eigen::ArrayXd q = value.transpose().array() - 0.5 * curvature * diff.square();
  const Eigen::ArrayXd error = q - targets.array();

  const double delta = config_.huber_delta;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(error(i));
    loss += a <= delta ? 0.5 * error(i) * error(i) : delta * (a - 0.5 * delta);
  }
  loss /= static_cast<double>(n);

  // dL/dq, with the Huber slope clipped at +-delta and the 1/n of the mean.
  const Eigen::ArrayXd dq =
      error.min(delta).max(-delta) / static_cast<double>(n);

  const Eigen::RowVectorXd g_value = dq.matrix().transpose();
  const Eigen::RowVectorXd g_mean = (dq * curvature * diff).matrix().transpose();
  const Eigen::RowVectorXd g_curv =
      (dq * (-0.5) * diff.square() * curve_sigmoid).matrix().transpose();

  grad_out.setZero(params_.size());
  const std::size_t hidden = static_cast<std::size_t>(config_.hidden_layers);
  const Eigen::MatrixXd& top = cache.activations.back();

  const auto accumulate_head = [&](std::size_t layer, const Eigen::RowVectorXd& g) {
    Eigen::Map<Eigen::MatrixXd>(grad_out.data() + weights_[layer].offset,
                                weights_[layer].rows, weights_[layer].cols) = g * top.transpose();
    grad_out(biases_[layer].offset) = g.sum();
  };
  accumulate_head(hidden, g_value);
  accumulate_head(hidden + 1, g_mean);
  accumulate_head(hidden + 2, g_curv);

  Eigen::MatrixXd g_activation = weight(hidden).transpose() * g_value +
                                 weight(hidden + 1).transpose() * g_mean +
                                 weight(hidden + 2).transpose() * g_curv;

  const double slope = config_.leaky_relu_slope;
  for (std::size_t l = hidden; l-- > 0;) {
    if (!cache.dropout_masks.empty())
      g_activation.array() *= cache.dropout_masks[l].array();
    const Eigen::MatrixXd& z = cache.preactivations[l];
    Eigen::MatrixXd g_pre = (z.array() > 0.0)
                                .select(g_activation.array(), g_activation.array() * slope)
                                .matrix();
    Eigen::Map<Eigen::MatrixXd>(grad_out.data() + weights_[l].offset, weights_[l].rows,
                                weights_[l].cols) =
        g_pre * cache.activations[l].transpose();
    Eigen::Map<Eigen::VectorXd>(grad_out.data() + biases_[l].offset, biases_[l].rows) =
        g_pre.rowwise().sum();
    if (l > 0) g_activation = weight(l).transpose() * g_pre;
  }

  return loss;
}

UpdateResult NafNetwork::update(AdamState& optimizer, const UpdateBatch& batch,
                                Rng* dropout_rng, bool per_sample) {
  const Eigen::Index n = batch.size();
  if (batch.states.cols() != n || batch.targets.size() != n ||
      batch.learning_rates.size() != n)
    throw std::invalid_argument("NafNetwork::update: batch size mismatch");
  if (n == 0) return {};

  Eigen::VectorXd grad(params_.size());
  double loss_sum = 0.0;
  int steps = 0;

  const auto apply = [&](const Eigen::MatrixXd& states, const Eigen::VectorXd& controls,
                         const Eigen::VectorXd& targets, double learning_rate,
                         Eigen::Index count) {
    const double loss = loss_and_grad(states, controls, targets, grad, dropout_rng);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw DivergenceError("NafNetwork::update: non-finite loss or gradient (loss=" +
                            std::to_string(loss) + ")");
    optimizer.step(params_, grad, learning_rate);
    loss_sum += loss * static_cast<double>(count);
    ++steps;
  };

  if (per_sample) {
    for (Eigen::Index i = 0; i < n; ++i)
      apply(batch.states.col(i), batch.controls.segment(i, 1),
            batch.targets.segment(i, 1), batch.learning_rates(i), 1);
    return {loss_sum / static_cast<double>(n), n, steps};
  }

  // Buckets of equal learning rate, processed from the largest rate down.
  std::map<double, std::vector<Eigen::Index>, std::greater<>> buckets;
  for (Eigen::Index i = 0; i < n; ++i) buckets[batch.learning_rates(i)].push_back(i);

  for (const auto& [rate, indices] : buckets) {
    const Eigen::Index count = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd states(batch.states.rows(), count);
    Eigen::VectorXd controls(count), targets(count);
    for (Eigen::Index j = 0; j < count; ++j) {
      states.col(j) = batch.states.col(indices[j]);
      controls(j) = batch.controls(indices[j]);
      targets(j) = batch.targets(indices[j]);
    }
    apply(states, controls, targets, rate, count);
  }
  return {loss_sum / static_cast<double>(n), n, steps};
}

void NafNetwork::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size())
    throw std::invalid_argument("NafNetwork::set_parameters: expected " +
                                std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(params.size()));
  params_ = params;
}

double td_target(const NafNetwork& target_net, double reward,
                 const Eigen::VectorXd& next_observation, bool terminal, double gamma) {
  if (terminal) return reward;
  return reward + gamma * target_net.value(next_observation);
}

}  // namespace coopcart
