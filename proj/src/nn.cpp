#include "phrlab/nn.h"

#include <algorithm>
#include <cmath>

#include "phrlab/error.h"
#include "phrlab/seeding.h"

namespace phrlab {
namespace {

constexpr double kHeadGain = 0.1;

double g_backward_corruption = 0.0;

double round_float(double x) { return static_cast<double>(static_cast<float>(x)); }

Linear zero_linear(std::size_t out, std::size_t in) {
  return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

std::vector<Linear> zero_groups_like(const std::vector<Linear>& groups) {
  std::vector<Linear> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    out.push_back(zero_linear(static_cast<std::size_t>(g.weight.rows()), static_cast<std::size_t>(g.weight.cols())));
  }
  return out;
}

bool all_finite(const Linear& l) { return l.weight.allFinite() && l.bias.allFinite(); }

void accumulate(Linear& into, const Eigen::MatrixXd& delta, const Eigen::MatrixXd& input) {
  const double scale = 1.0 + g_backward_corruption;
  into.weight.noalias() += scale * (delta * input.transpose());
  into.bias += scale * delta.rowwise().sum();
}

}  // namespace

void NetSpec::validate() const {
  if (input_dim < 1) throw ConfigError("net input_dim must be >= 1");
  if (n_heads < 1) throw ConfigError("net n_heads must be >= 1");
  if (n_actions < 2) throw ConfigError("net n_actions must be >= 2");
  if (head_width < 1) throw ConfigError("net head_width must be >= 1");
  for (std::size_t w : hidden_layers) {
    if (w < 1) throw ConfigError("net hidden layer widths must be >= 1");
  }
}

std::size_t NetSpec::parameter_count() const {
  std::size_t total = 0;
  std::size_t in = input_dim;
  for (std::size_t w : hidden_layers) {
    total += w * in + w;
    in = w;
  }
  total += head_width * in + head_width;
  total += head_width + 1;
  total += n_heads * (n_actions * head_width + n_actions);
  return total;
}

ModelParams ModelParams::zeros(const NetSpec& spec) {
  spec.validate();
  ModelParams p;
  p.spec_ = spec;
  std::size_t in = spec.input_dim;
  for (std::size_t w : spec.hidden_layers) {
    p.groups_.push_back(zero_linear(w, in));
    in = w;
  }
  p.groups_.push_back(zero_linear(spec.head_width, in));
  p.groups_.push_back(zero_linear(1, spec.head_width));
  for (std::size_t h = 0; h < spec.n_heads; ++h) p.groups_.push_back(zero_linear(spec.n_actions, spec.head_width));
  p.trainable_.assign(p.groups_.size(), true);
  p.input_offset_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.input_dim));
  return p;
}

ModelParams ModelParams::initialize(const NetSpec& spec, std::uint64_t seed) {
  ModelParams p = zeros(spec);
  Rng rng(derive_seed(seed, {0x696e6974}));
  for (std::size_t g = 0; g < p.groups_.size(); ++g) {
    auto& w = p.groups_[g].weight;
    const double gain = g < spec.trunk_depth() ? 1.0 : kHeadGain;
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = round_float((2.0 * uniform01(rng) - 1.0) * bound);
    }
  }
  return p;
}

std::string ModelParams::group_name(std::size_t g) const {
  if (g < spec_.trunk_depth()) return "trunk_" + std::to_string(g);
  if (g == value_group()) return "value";
  return "head_" + std::to_string(g - spec_.trunk_depth());  // 1-based head numbering
}

void ModelParams::set_all_trainable(bool on) { std::fill(trainable_.begin(), trainable_.end(), on); }

void ModelParams::set_trunk_trainable(bool on) {
  for (std::size_t k = 0; k < spec_.trunk_depth(); ++k) trainable_[k] = on;
}

void ModelParams::set_trainable_mask(std::vector<bool> mask) {
  if (mask.size() != groups_.size()) throw UsageError("trainable mask size does not match parameter groups");
  trainable_ = std::move(mask);
}

std::vector<float> ModelParams::flatten() const {
  std::vector<float> out;
  out.reserve(spec_.parameter_count());
  for (const auto& g : groups_) {
    for (Eigen::Index r = 0; r < g.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.weight.cols(); ++c) out.push_back(static_cast<float>(g.weight(r, c)));
    }
    for (Eigen::Index r = 0; r < g.bias.size(); ++r) out.push_back(static_cast<float>(g.bias(r)));
  }
  return out;
}

void ModelParams::unflatten(std::span<const float> values) {
  if (values.size() != spec_.parameter_count()) {
    throw UsageError("parameter payload has " + std::to_string(values.size()) + " values, expected " +
                     std::to_string(spec_.parameter_count()));
  }
  std::size_t i = 0;
  for (auto& g : groups_) {
    for (Eigen::Index r = 0; r < g.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.weight.cols(); ++c) g.weight(r, c) = values[i++];
    }
    for (Eigen::Index r = 0; r < g.bias.size(); ++r) g.bias(r) = values[i++];
  }
}

void ModelParams::set_input_offset(const Eigen::VectorXd& offset) {
  if (offset.size() != static_cast<Eigen::Index>(spec_.input_dim)) {
    throw UsageError("input offset has " + std::to_string(offset.size()) + " entries, expected " +
                     std::to_string(spec_.input_dim));
  }
  input_offset_ = offset.unaryExpr(&round_float);
}

void ModelParams::round_to_float() {
  for (auto& g : groups_) {
    g.weight = g.weight.unaryExpr(&round_float);
    g.bias = g.bias.unaryExpr(&round_float);
  }
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(spec_ == other.spec_) || trainable_ != other.trainable_ || input_offset_ != other.input_offset_) return false;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].weight != other.groups_[g].weight || groups_[g].bias != other.groups_[g].bias) return false;
  }
  return true;
}

OutputGradients OutputGradients::zeros(std::size_t heads, std::size_t n_actions, std::size_t batch) {
  OutputGradients g;
  g.logits.assign(heads, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_actions), static_cast<Eigen::Index>(batch)));
  g.values = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(batch));
  return g;
}

GradBuffer GradBuffer::like(const ModelParams& params) {
  GradBuffer g;
  g.groups = zero_groups_like(params.groups());
  return g;
}

void GradBuffer::zero() {
  for (auto& l : groups) {
    l.weight.setZero();
    l.bias.setZero();
  }
  count = 0;
}

GradBuffer& GradBuffer::operator+=(const GradBuffer& other) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].weight += other.groups[g].weight;
    groups[g].bias += other.groups[g].bias;
  }
  count += other.count;
  return *this;
}

void GradBuffer::scale(double factor) {
  for (auto& l : groups) {
    l.weight *= factor;
    l.bias *= factor;
  }
}

double GradBuffer::squared_norm() const {
  double total = 0.0;
  for (const auto& l : groups) total += l.weight.squaredNorm() + l.bias.squaredNorm();
  return total;
}

bool GradBuffer::is_zero() const {
  return std::all_of(groups.begin(), groups.end(),
                     [](const Linear& l) { return l.weight.isZero(0.0) && l.bias.isZero(0.0); });
}

Eigen::MatrixXd to_matrix(std::span<const Observation> observations) {
  if (observations.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(observations.front().size()),
                    static_cast<Eigen::Index>(observations.size()));
  for (std::size_t j = 0; j < observations.size(); ++j) {
    const auto& o = observations[j];
    if (static_cast<Eigen::Index>(o.size()) != m.rows()) throw UsageError("observations differ in length");
    for (std::size_t i = 0; i < o.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = o[i];
  }
  return m;
}

Eigen::VectorXd to_vector(std::span<const float> observation) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(observation.size()));
  for (std::size_t i = 0; i < observation.size(); ++i) v(static_cast<Eigen::Index>(i)) = observation[i];
  return v;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double shift = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - shift).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& grad_probabilities) {
  const Eigen::RowVectorXd dot = probabilities.cwiseProduct(grad_probabilities).colwise().sum();
  return probabilities.cwiseProduct(grad_probabilities - dot.replicate(grad_probabilities.rows(), 1));
}

ForwardPass forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs, std::optional<std::size_t> heads) {
  const NetSpec& spec = params.spec();
  if (static_cast<std::size_t>(inputs.rows()) != spec.input_dim) {
    throw UsageError("observation length " + std::to_string(inputs.rows()) + " does not match input_dim " +
                     std::to_string(spec.input_dim));
  }
  const std::size_t n_eval = heads.value_or(spec.n_heads);
  if (n_eval < 1 || n_eval > spec.n_heads) {
    throw UsageError("requested " + std::to_string(n_eval) + " heads from a net with " +
                     std::to_string(spec.n_heads));
  }
  ForwardPass pass;
  pass.activations.reserve(spec.trunk_depth() + 1);
  pass.activations.push_back(inputs.colwise() - params.input_offset());
  for (std::size_t k = 0; k < spec.trunk_depth(); ++k) {
    const Linear& layer = params.group(params.trunk_group(k));
    Eigen::MatrixXd z = layer.weight * pass.activations.back();
    z.colwise() += layer.bias;
    pass.activations.push_back(z.cwiseMax(0.0));
  }
  const Eigen::MatrixXd& top = pass.activations.back();
  const Linear& value = params.group(params.value_group());
  pass.values = (value.weight * top).array() + value.bias(0);
  pass.logits.reserve(n_eval);
  pass.probabilities.reserve(n_eval);
  for (std::size_t h = 0; h < n_eval; ++h) {
    const Linear& head = params.group(params.policy_group(h));
    Eigen::MatrixXd z = head.weight * top;
    z.colwise() += head.bias;
    pass.probabilities.push_back(softmax_columns(z));
    pass.logits.push_back(std::move(z));
  }
  return pass;
}

PolicyVectorOutput forward(const ModelParams& params, std::span<const float> observation,
                           std::optional<std::size_t> heads) {
  const ForwardPass pass = forward_batch(params, to_vector(observation), heads);
  PolicyVectorOutput out;
  for (std::size_t h = 0; h < pass.logits.size(); ++h) {
    const auto& z = pass.logits[h];
    const auto& p = pass.probabilities[h];
    out.logits.emplace_back(z.data(), z.data() + z.rows());
    out.distributions.emplace_back(p.data(), p.data() + p.rows());
  }
  out.value = pass.values(0);
  return out;
}

void backward_batch(const ModelParams& params, const ForwardPass& pass, const OutputGradients& out_grads,
                    GradBuffer& grads) {
  const NetSpec& spec = params.spec();
  if (out_grads.logits.size() > pass.logits.size()) {
    throw UsageError("output gradients given for more heads than were evaluated");
  }
  const auto batch = static_cast<Eigen::Index>(pass.batch());
  const std::size_t depth = spec.trunk_depth();
  std::size_t lowest_trunk = depth;
  for (std::size_t k = 0; k < depth; ++k) {
    if (params.trainable(params.trunk_group(k))) {
      lowest_trunk = k;
      break;
    }
  }
  const bool need_trunk = lowest_trunk < depth;
  const Eigen::MatrixXd& top = pass.activations.back();
  Eigen::MatrixXd delta;
  if (need_trunk) delta = Eigen::MatrixXd::Zero(top.rows(), batch);

  for (std::size_t h = 0; h < out_grads.logits.size(); ++h) {
    const Eigen::MatrixXd& g = out_grads.logits[h];
    if (g.size() == 0) continue;
    if (g.rows() != static_cast<Eigen::Index>(spec.n_actions) || g.cols() != batch) {
      throw UsageError("logit gradient shape mismatch for head " + std::to_string(h + 1));
    }
    const std::size_t group = params.policy_group(h);
    if (params.trainable(group)) accumulate(grads.groups[group], g, top);
    if (need_trunk) delta.noalias() += params.group(group).weight.transpose() * g;
  }
  if (out_grads.values.size() != 0) {
    if (out_grads.values.size() != batch) throw UsageError("value gradient shape mismatch");
    const std::size_t group = params.value_group();
    if (params.trainable(group)) accumulate(grads.groups[group], out_grads.values, top);
    if (need_trunk) delta.noalias() += params.group(group).weight.transpose() * out_grads.values;
  }
  if (need_trunk) {
    for (std::size_t k = depth; k-- > lowest_trunk;) {
      const Eigen::MatrixXd& out = pass.activations[k + 1];
      delta = delta.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
      const std::size_t group = params.trunk_group(k);
      if (params.trainable(group)) accumulate(grads.groups[group], delta, pass.activations[k]);
      if (k > lowest_trunk) delta = params.group(group).weight.transpose() * delta;
    }
  }
  grads.count += static_cast<std::size_t>(batch);
}

GradBuffer backward(const ModelParams& params, std::span<const float> observation, const OutputGradients& out_grads) {
  const ForwardPass pass = forward_batch(params, to_vector(observation));
  GradBuffer grads = GradBuffer::like(params);
  backward_batch(params, pass, out_grads, grads);
  return grads;
}

AdamState AdamState::like(const ModelParams& params) {
  return {zero_groups_like(params.groups()), zero_groups_like(params.groups()), 0};
}

void adam_step(ModelParams& params, const GradBuffer& grads, AdamState& state, const AdamConfig& config) {
  if (grads.groups.size() != params.num_groups() || state.first_moment.size() != params.num_groups()) {
    throw UsageError("gradient buffer or optimizer state does not match the parameters");
  }
  for (std::size_t g = 0; g < params.num_groups(); ++g) {
    if (params.trainable(g) && !all_finite(grads.groups[g])) {
      throw TrainingError("non-finite gradient in parameter group '" + params.group_name(g) + "' at optimizer step " +
                          std::to_string(state.steps + 1));
    }
  }
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const auto update = [&](auto& p, const auto& grad, auto& m, auto& v) {
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    p.array() -= config.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
    p = p.unaryExpr(&round_float);
  };
  for (std::size_t g = 0; g < params.num_groups(); ++g) {
    if (!params.trainable(g)) continue;
    Linear& p = params.group(g);
    update(p.weight, grads.groups[g].weight, state.first_moment[g].weight, state.second_moment[g].weight);
    update(p.bias, grads.groups[g].bias, state.first_moment[g].bias, state.second_moment[g].bias);
  }
}

double clip_grad_norm(GradBuffer& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

GradientCheckReport gradient_check(ModelParams params, const Eigen::MatrixXd& inputs, const LossFunction& loss,
                                   const GradientCheckOptions& options) {
  std::size_t trainable_count = 0;
  for (std::size_t g = 0; g < params.num_groups(); ++g) {
    if (params.trainable(g)) trainable_count += params.group(g).size();
  }
  if (trainable_count > options.max_parameters) {
    throw UsageError("gradient check limited to " + std::to_string(options.max_parameters) + " parameters, net has " +
                     std::to_string(trainable_count));
  }

  const ForwardPass base = forward_batch(params, inputs);
  OutputGradients out_grads;
  loss(base, &out_grads);
  GradBuffer analytic = GradBuffer::like(params);
  backward_batch(params, base, out_grads, analytic);

  const auto same_kinks = [&](const ForwardPass& other) {
    for (std::size_t k = 1; k < base.activations.size(); ++k) {
      if (((base.activations[k].array() > 0.0) != (other.activations[k].array() > 0.0)).any()) return false;
    }
    return true;
  };
  const auto probe = [&](double& slot, double analytic_value, GroupCheck& check) {
    const double original = slot;
    slot = original + options.epsilon;
    const ForwardPass plus = forward_batch(params, inputs);
    const double loss_plus = loss(plus, nullptr);
    slot = original - options.epsilon;
    const ForwardPass minus = forward_batch(params, inputs);
    const double loss_minus = loss(minus, nullptr);
    slot = original;
    if (!same_kinks(plus) || !same_kinks(minus)) {
      ++check.skipped_kinks;
      return;
    }
    const double numeric = (loss_plus - loss_minus) / (2.0 * options.epsilon);
    const double denom = std::max({std::abs(analytic_value), std::abs(numeric), options.absolute_floor});
    check.max_relative_error = std::max(check.max_relative_error, std::abs(analytic_value - numeric) / denom);
    ++check.checked;
  };

  GradientCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t g = 0; g < params.num_groups(); ++g) {
    if (!params.trainable(g)) continue;
    GroupCheck check{params.group_name(g)};
    Linear& layer = params.group(g);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        probe(layer.weight(r, c), analytic.groups[g].weight(r, c), check);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) probe(layer.bias(r), analytic.groups[g].bias(r), check);
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.groups.push_back(std::move(check));
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

GradientCheckReport gradient_check(const NetSpec& spec, double tolerance, std::uint64_t seed) {
  ModelParams params = ModelParams::initialize(spec, seed);
  Rng rng(derive_seed(seed, {0x67636b}));
  for (auto& layer : params.groups()) {
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = 0.2 * (2.0 * uniform01(rng) - 1.0);
  }
  constexpr Eigen::Index kBatch = 3;
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(spec.input_dim), kBatch);
  for (Eigen::Index j = 0; j < inputs.size(); ++j) inputs.data()[j] = 2.0 * uniform01(rng) - 1.0;
  std::vector<Eigen::MatrixXd> targets;
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(spec.n_actions), kBatch);
    for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = uniform01(rng);
    targets.push_back(softmax_columns(t));
  }
  Eigen::RowVectorXd value_targets(kBatch);
  for (Eigen::Index j = 0; j < kBatch; ++j) value_targets(j) = 2.0 * uniform01(rng) - 1.0;

  const LossFunction loss = [&](const ForwardPass& pass, OutputGradients* grads) {
    double total = (pass.values - value_targets).squaredNorm();
    if (grads) {
      grads->logits.clear();
      grads->values = 2.0 * (pass.values - value_targets);
    }
    for (std::size_t h = 0; h < pass.probabilities.size(); ++h) {
      const Eigen::MatrixXd diff = pass.probabilities[h] - targets[h];
      total += diff.squaredNorm();
      if (grads) grads->logits.push_back(softmax_backward(pass.probabilities[h], 2.0 * diff));
    }
    return total;
  };
  GradientCheckOptions options;
  options.tolerance = tolerance;
  return gradient_check(std::move(params), inputs, loss, options);
}

void set_backward_corruption_for_testing(double factor) { g_backward_corruption = factor; }

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

}  // namespace phrlab
