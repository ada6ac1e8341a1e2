#include "phrlab/losscheck.h"

#include <memory>

#include "phrlab/a2c.h"
#include "phrlab/phr.h"
#include "phrlab/seeding.h"

namespace phrlab {
namespace {

constexpr Eigen::Index kBatch = 4;

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& v : p) {
    v = 0.05 + uniform01(rng);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

NetSpec random_check_spec(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x73706563}));
  constexpr std::size_t kHeads[] = {1, 4, 16};
  for (;;) {
    NetSpec spec;
    spec.input_dim = 3 + uniform_below(rng, 10);
    spec.hidden_layers.assign(1 + uniform_below(rng, 2), 0);
    for (auto& w : spec.hidden_layers) w = 4 + uniform_below(rng, 13);
    spec.head_width = 4 + uniform_below(rng, 13);
    spec.n_heads = kHeads[uniform_below(rng, 3)];
    spec.n_actions = 2 + uniform_below(rng, 4);
    if (spec.parameter_count() <= 5000) return spec;
  }
}

std::vector<LossCheck> check_training_losses(const NetSpec& spec, std::uint64_t seed,
                                             const GradientCheckOptions& options) {
  ModelParams params = ModelParams::initialize(spec, seed);
  params.set_all_trainable(true);
  Rng rng(derive_seed(seed, {0x6c6f7373}));
  for (auto& layer : params.groups()) {
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = 0.2 * (2.0 * uniform01(rng) - 1.0);
  }

  // One trajectory whose first kBatch states are the anchors of the PHR batch.
  auto traj = std::make_shared<Trajectory>();
  const std::size_t length = static_cast<std::size_t>(kBatch) + spec.n_heads - 1;
  for (std::size_t t = 0; t < length; ++t) {
    TrajectoryStep step;
    step.observation.resize(spec.input_dim);
    for (float& v : step.observation) v = static_cast<float>(2.0 * uniform01(rng) - 1.0);
    step.teacher_policy = random_distribution(rng, spec.n_actions);
    traj->steps.push_back(std::move(step));
  }
  std::vector<SubSequence> batch;
  std::vector<Observation> anchors;
  for (std::size_t t = 0; t < static_cast<std::size_t>(kBatch); ++t) {
    batch.push_back({traj, t, spec.n_heads});
    anchors.push_back(traj->steps[t].observation);
  }
  const Eigen::MatrixXd inputs = to_matrix(anchors);

  std::vector<ActionId> actions(kBatch);
  std::vector<double> returns(kBatch), advantages(kBatch);
  for (Eigen::Index j = 0; j < kBatch; ++j) {
    actions[static_cast<std::size_t>(j)] = static_cast<ActionId>(uniform_below(rng, spec.n_actions));
    returns[static_cast<std::size_t>(j)] = 2.0 * uniform01(rng) - 1.0;
    advantages[static_cast<std::size_t>(j)] = 2.0 * uniform01(rng) - 1.0;
  }
  A2CConfig a2c;
  std::vector<LossCheck> out;
  out.push_back({"a2c", gradient_check(params, inputs,
                                       [&](const ForwardPass& pass, OutputGradients* grads) {
                                         return a2c_loss(pass, actions, returns, advantages, a2c, grads).total;
                                       },
                                       options)});
  if (spec.n_heads < 2) return out;
  for (Measure m : {Measure::SquaredDistance, Measure::KLDivergence, Measure::CrossEntropy}) {
    PhrConfig phr;
    phr.horizon = spec.n_heads;
    phr.measure = m;
    phr.lambda = default_lambda(m);
    out.push_back({"phr-" + std::string(to_string(m)),
                   gradient_check(params, inputs,
                                  [&](const ForwardPass& pass, OutputGradients* grads) {
                                    return phr_loss(pass, batch, phr, grads);
                                  },
                                  options)});
  }
  return out;
}

}  // namespace phrlab
