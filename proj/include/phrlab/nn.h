#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phrlab/envs.h"

namespace phrlab {

/// Shape of the policy-vector network: trunk (hidden layers + shared penultimate
/// layer, all ReLU), one value head and `n_heads` linear policy heads.
struct NetSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_layers = {128, 128};
  std::size_t head_width = 128;
  std::size_t n_heads = 1;
  std::size_t n_actions = 3;

  void validate() const;
  std::size_t trunk_depth() const { return hidden_layers.size() + 1; }
  std::size_t num_groups() const { return trunk_depth() + 1 + n_heads; }
  std::size_t parameter_count() const;

  bool operator==(const NetSpec&) const = default;
};

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;

  std::size_t size() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

/// All trainable weights, one group per layer, in declaration order:
/// trunk layers, value head, policy heads 1..n.
///
/// Values are kept on the float32 grid (the checkpoint precision) after
/// initialization and every optimizer step; arithmetic runs in double.
class ModelParams {
 public:
  ModelParams() = default;

  static ModelParams zeros(const NetSpec& spec);
  /// Uniform He-style fan-in initialization, biases zero; output heads scaled down.
  static ModelParams initialize(const NetSpec& spec, std::uint64_t seed);

  const NetSpec& spec() const { return spec_; }
  std::size_t num_groups() const { return groups_.size(); }

  std::size_t trunk_group(std::size_t layer) const { return layer; }
  std::size_t value_group() const { return spec_.trunk_depth(); }
  /// `head` is 0-based: head 0 is the teacher policy pi_1.
  std::size_t policy_group(std::size_t head) const { return spec_.trunk_depth() + 1 + head; }
  std::string group_name(std::size_t group) const;

  Linear& group(std::size_t g) { return groups_[g]; }
  const Linear& group(std::size_t g) const { return groups_[g]; }
  std::vector<Linear>& groups() { return groups_; }
  const std::vector<Linear>& groups() const { return groups_; }

  bool trainable(std::size_t g) const { return trainable_[g]; }
  void set_trainable(std::size_t g, bool on) { trainable_[g] = on; }
  void set_all_trainable(bool on);
  void set_trunk_trainable(bool on);
  const std::vector<bool>& trainable_mask() const { return trainable_; }
  void set_trainable_mask(std::vector<bool> mask);

  /// Flattened parameters in declaration order (weights row-major, then bias).
  std::vector<float> flatten() const;
  void unflatten(std::span<const float> values);

  /// Fixed input centering subtracted before the first layer. Never trained;
  /// zero unless set (train_teacher estimates it from a short random-policy probe).
  const Eigen::VectorXd& input_offset() const { return input_offset_; }
  void set_input_offset(const Eigen::VectorXd& offset);

  void round_to_float();
  bool operator==(const ModelParams& other) const;

 private:
  NetSpec spec_;
  std::vector<Linear> groups_;
  std::vector<bool> trainable_;
  Eigen::VectorXd input_offset_;
};

/// Single-observation output: n distributions over A actions and one value.
struct PolicyVectorOutput {
  std::vector<std::vector<double>> distributions;
  std::vector<std::vector<double>> logits;
  double value = 0.0;
};

/// Batched forward activations, kept for backward. Columns are samples.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  // [0] = centered input, [k+1] = trunk layer k output
  std::vector<Eigen::MatrixXd> logits;       // per evaluated head, A x batch
  std::vector<Eigen::MatrixXd> probabilities;
  Eigen::RowVectorXd values;

  std::size_t batch() const { return static_cast<std::size_t>(activations.front().cols()); }
};

/// dLoss/dOutputs. An empty matrix means that head receives no gradient.
struct OutputGradients {
  std::vector<Eigen::MatrixXd> logits;
  Eigen::RowVectorXd values;

  static OutputGradients zeros(std::size_t heads, std::size_t n_actions, std::size_t batch);
};

struct GradBuffer {
  std::vector<Linear> groups;
  std::size_t count = 0;

  static GradBuffer like(const ModelParams& params);
  void zero();
  GradBuffer& operator+=(const GradBuffer& other);
  void scale(double factor);
  double squared_norm() const;
  bool is_zero() const;
};

Eigen::MatrixXd to_matrix(std::span<const Observation> observations);
Eigen::VectorXd to_vector(std::span<const float> observation);

/// Softmax over each column, computed stably.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);
/// Maps dLoss/dProbabilities to dLoss/dLogits through the softmax Jacobian, per column.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& grad_probabilities);

/// Evaluates trunk, value head and the first `heads` policy heads (all heads by default).
ForwardPass forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs,
                          std::optional<std::size_t> heads = std::nullopt);
PolicyVectorOutput forward(const ModelParams& params, std::span<const float> observation,
                           std::optional<std::size_t> heads = std::nullopt);

/// Accumulates dLoss/dParams into `grads` for every trainable group; frozen
/// groups are left untouched.
void backward_batch(const ModelParams& params, const ForwardPass& pass, const OutputGradients& out_grads,
                    GradBuffer& grads);
GradBuffer backward(const ModelParams& params, std::span<const float> observation,
                    const OutputGradients& out_grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Linear> first_moment;
  std::vector<Linear> second_moment;
  std::size_t steps = 0;

  static AdamState like(const ModelParams& params);
};

/// One Adam update of every trainable group. Throws TrainingError on a
/// non-finite gradient, naming the offending group.
void adam_step(ModelParams& params, const GradBuffer& grads, AdamState& state, const AdamConfig& config);

/// Rescales `grads` so its global norm is at most `max_norm`; returns the norm before clipping.
double clip_grad_norm(GradBuffer& grads, double max_norm);

/// Scalar loss on a forward pass; fills output gradients when requested.
using LossFunction = std::function<double(const ForwardPass&, OutputGradients*)>;

struct GroupCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

struct GradientCheckReport {
  std::vector<GroupCheck> groups;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradientCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Floor on the relative-error denominator for entries whose true gradient is ~0.
  double absolute_floor = 1e-7;
  std::size_t max_parameters = 5000;
};

/// Compares backward_batch against central finite differences over every
/// trainable parameter. Coordinates whose perturbation flips a ReLU are skipped.
GradientCheckReport gradient_check(ModelParams params, const Eigen::MatrixXd& inputs, const LossFunction& loss,
                                   const GradientCheckOptions& options = {});

/// Fresh random net with a squared-error loss on every head and the value.
GradientCheckReport gradient_check(const NetSpec& spec, double tolerance, std::uint64_t seed);

/// Test hook: perturbs every gradient produced by backward_batch (negative control for gradient_check).
void set_backward_corruption_for_testing(double factor);

std::size_t argmax(std::span<const double> values);

}  // namespace phrlab
