#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "coopcart/rng.hpp"

namespace coopcart {

/// Thrown when a training update produces a non-finite loss or gradient.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NafConfig {
  int input_dim = 4;
  int hidden_layers = 3;
  int hidden_units = 64;
  double dropout = 0.2;           // applied after each hidden activation, training only
  double leaky_relu_slope = 0.01;
  double curvature_floor = 1e-3;  // additive floor under softplus(curvature head)
  double control_limit = 10.0;    // greedy controls are clamped to this range
  double huber_delta = 1.0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 0.0;  // no fuzz factor; exact-zero second moments yield a zero step
};

/// Adam with bias correction over a flat parameter vector.
class AdamState {
 public:
  AdamState(Eigen::Index parameter_count, AdamConfig config = {});

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  const Eigen::VectorXd& first_moment() const { return first_moment_; }
  const Eigen::VectorXd& second_moment() const { return second_moment_; }
  void restore(Eigen::VectorXd first_moment, Eigen::VectorXd second_moment,
               std::int64_t step_count);

 private:
  AdamConfig config_;
  Eigen::VectorXd first_moment_, second_moment_;
  std::int64_t step_count_ = 0;
};

/// One gradient-update batch. Columns of `states` are observations; each
/// sample carries its own TD target and learning rate.
struct UpdateBatch {
  Eigen::MatrixXd states;
  Eigen::VectorXd controls;
  Eigen::VectorXd targets;
  Eigen::VectorXd learning_rates;

  Eigen::Index size() const { return controls.size(); }
};

struct UpdateResult {
  double mean_loss = 0.0;
  Eigen::Index samples = 0;
  int optimizer_steps = 0;
};

/// Scalar-control Q-function with a normalized-advantage decomposition:
///
///   Q(x, u) = V(x) - 0.5 * p(x) * (u - mu(x))^2,
///   p(x)    = softplus(c(x)) + curvature_floor > 0,
///
/// where V, mu and c are linear heads on a shared fully connected trunk
/// (LeakyReLU activations, dropout after each hidden layer while training).
/// The advantage is a concave parabola in u, so max_u Q(x, u) = V(x) and the
/// greedy control is mu(x) in closed form.
///
/// Parameters live in one flat vector (layer-ordered, documented in
/// docs/formats.md) so the optimizer, checkpointing and finite-difference
/// checks all see the same layout.
class NafNetwork {
 public:
  /// Random initialization: hidden weights Xavier-uniform clipped to
  /// [-0.5, 0.5] with zero biases, head weights and biases uniform in
  /// [-1, 1]. Draw order is layer by layer, weights (column-major) then bias.
  NafNetwork(const NafConfig& config, Rng& init_rng);

  const NafConfig& config() const { return config_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  struct Heads {
    double value = 0.0;
    double mean = 0.0;
    double curvature = 0.0;  // p(x), already softplus-transformed and floored
  };

  /// Deterministic evaluation-mode forward pass (no dropout).
  Heads heads(const Eigen::VectorXd& observation) const;
  double value(const Eigen::VectorXd& observation) const;
  double q_value(const Eigen::VectorXd& observation, double control) const;
  /// mu(x) clamped to the control range.
  double greedy_control(const Eigen::VectorXd& observation) const;
  /// V(x) for each column of `observations` (evaluation mode).
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& observations) const;
  /// Q(x, u) for each column/control pair (evaluation mode).
  Eigen::VectorXd q_value_batch(const Eigen::MatrixXd& observations,
                                const Eigen::VectorXd& controls) const;

  /// Mean Huber loss between Q(x, u) and the fixed targets, plus its
  /// gradient with respect to all parameters. Dropout masks are drawn from
  /// `dropout_rng` when it is non-null (training mode); pass nullptr for the
  /// deterministic evaluation-mode loss (finite-difference checks).
  double loss_and_grad(const Eigen::MatrixXd& states, const Eigen::VectorXd& controls,
                       const Eigen::VectorXd& targets, Eigen::VectorXd& grad_out,
                       Rng* dropout_rng) const;

  /// One training update. The batch is partitioned into buckets of equal
  /// learning rate, processed in descending-rate order, one Adam step per
  /// bucket on the bucket's mean Huber loss (later buckets see the updated
  /// parameters). With `per_sample` every sample becomes its own Adam step,
  /// in batch order. Throws DivergenceError on non-finite loss or gradient.
  UpdateResult update(AdamState& optimizer, const UpdateBatch& batch, Rng* dropout_rng,
                      bool per_sample = false);

  Eigen::VectorXd parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);

 private:
  struct TensorSpan {
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
  };

  struct Trunk;  // forward-pass cache, defined in the implementation

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  void forward_heads(const Eigen::MatrixXd& states, Rng* dropout_rng, Trunk* cache,
                     Eigen::RowVectorXd& value, Eigen::RowVectorXd& mean,
                     Eigen::RowVectorXd& curvature_raw) const;

  NafConfig config_;
  // Layer l: weights_[l] / biases_[l]. Hidden layers first, then the value,
  // mean and curvature heads.
  std::vector<TensorSpan> weights_, biases_;
  Eigen::VectorXd params_;
};

/// TD target r + gamma * max_u Q(x', u) evaluated with the target network in
/// evaluation mode; terminal transitions do not bootstrap. The NAF shape
/// makes max_u Q analytic: it is V(x').
double td_target(const NafNetwork& target_net, double reward,
                 const Eigen::VectorXd& next_observation, bool terminal, double gamma);

}  // namespace coopcart
