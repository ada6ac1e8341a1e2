#include "phrlab/a2c.h"

#include <algorithm>
#include <cmath>

#include "phrlab/agent.h"
#include "phrlab/error.h"

namespace phrlab {
namespace {

constexpr double kLogFloor = 1e-12;

ActionId sample_action(const Eigen::MatrixXd& probs, Eigen::Index col, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < probs.rows(); ++a) {
    acc += probs(a, col);
    if (u < acc) return static_cast<ActionId>(a);
  }
  return static_cast<ActionId>(probs.rows() - 1);
}

}  // namespace

void A2CConfig::validate() const {
  if (workers < 1) throw ConfigError("a2c.workers must be >= 1");
  if (rollout_len < 1) throw ConfigError("a2c.rollout_len must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("a2c.gamma must be in (0, 1]");
  if (value_coef < 0.0 || entropy_coef < 0.0) throw ConfigError("a2c loss coefficients must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("a2c.lr must be > 0");
  if (max_grad_norm < 0.0) throw ConfigError("a2c.max_grad_norm must be >= 0");
  if (eval_interval < 1) throw ConfigError("a2c.eval_interval must be >= 1");
}

RolloutWorker::RolloutWorker(const EnvConfig& config, std::uint64_t run_seed, std::size_t index)
    : env(config), seeds(derive_seed(config.seed, {run_seed}), index) {
  observation = env.reset(seeds.next());
}

std::vector<RolloutWorker> make_workers(const EnvConfig& config, std::size_t count, std::uint64_t run_seed) {
  std::vector<RolloutWorker> workers;
  workers.reserve(count);
  for (std::size_t w = 0; w < count; ++w) workers.emplace_back(config, run_seed, w);
  return workers;
}

RolloutBatch collect_rollout(std::vector<RolloutWorker>& workers, const ModelParams& params, const A2CConfig& config,
                             Rng& rng, std::vector<EpisodeRecord>* finished) {
  if (workers.empty()) throw UsageError("collect_rollout needs at least one worker");
  RolloutBatch batch;
  batch.workers = workers.size();
  batch.steps = config.rollout_len;
  const auto n = static_cast<Eigen::Index>(batch.size());
  batch.observations.resize(static_cast<Eigen::Index>(params.spec().input_dim), n);
  batch.policies.resize(static_cast<Eigen::Index>(params.spec().n_actions), n);
  batch.actions.resize(batch.size());
  batch.rewards.resize(batch.size());
  batch.dones.resize(batch.size());
  batch.values.resize(batch.size());

  std::vector<Observation> current(workers.size());
  for (std::size_t t = 0; t < batch.steps; ++t) {
    for (std::size_t w = 0; w < workers.size(); ++w) current[w] = workers[w].observation;
    const Eigen::MatrixXd inputs = to_matrix(current);
    const ForwardPass pass = forward_batch(params, inputs, 1);
    for (std::size_t w = 0; w < workers.size(); ++w) {
      const auto col = static_cast<Eigen::Index>(w);
      const auto idx = static_cast<Eigen::Index>(batch.index(w, t));
      batch.observations.col(idx) = inputs.col(col);
      batch.policies.col(idx) = pass.probabilities[0].col(col);
      batch.values[static_cast<std::size_t>(idx)] = pass.values(col);
      const ActionId action = sample_action(pass.probabilities[0], col, rng);

      RolloutWorker& worker = workers[w];
      StepResult step = worker.env.step(action);
      worker.episode_return += step.reward;
      batch.actions[static_cast<std::size_t>(idx)] = action;
      batch.rewards[static_cast<std::size_t>(idx)] = step.reward;
      batch.dones[static_cast<std::size_t>(idx)] = step.done;
      if (step.done) {
        const bool success = worker.env.is_grid()
                                 ? step.reward > 0.0
                                 : worker.env.pong_state().score_player > worker.env.pong_state().score_opponent;
        if (finished) finished->push_back({worker.episode_return, success});
        worker.episode_return = 0.0;
        worker.observation = worker.env.reset(worker.seeds.next());
      } else {
        worker.observation = std::move(step.observation);
      }
    }
  }
  for (std::size_t w = 0; w < workers.size(); ++w) current[w] = workers[w].observation;
  const ForwardPass tail = forward_batch(params, to_matrix(current), 1);
  batch.bootstrap_values.assign(tail.values.data(), tail.values.data() + tail.values.size());
  return batch;
}

ReturnsAdvantages compute_returns_and_advantages(const RolloutBatch& batch, double gamma) {
  ReturnsAdvantages out;
  out.returns.resize(batch.size());
  out.advantages.resize(batch.size());
  for (std::size_t w = 0; w < batch.workers; ++w) {
    double ret = batch.bootstrap_values[w];
    for (std::size_t t = batch.steps; t-- > 0;) {
      const std::size_t i = batch.index(w, t);
      ret = batch.rewards[i] + gamma * ret * (batch.dones[i] ? 0.0 : 1.0);
      out.returns[i] = ret;
      out.advantages[i] = ret - batch.values[i];
    }
  }
  return out;
}

A2CLoss a2c_loss(const ForwardPass& pass, std::span<const ActionId> actions, std::span<const double> returns,
                 std::span<const double> advantages, const A2CConfig& config, OutputGradients* grads) {
  const Eigen::MatrixXd& probs = pass.probabilities.at(0);
  const auto batch = probs.cols();
  const double inv = 1.0 / static_cast<double>(batch);
  if (grads) {
    grads->logits.assign(1, Eigen::MatrixXd::Zero(probs.rows(), batch));
    grads->values = Eigen::RowVectorXd::Zero(batch);
  }
  A2CLoss loss;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto i = static_cast<std::size_t>(j);
    const Eigen::ArrayXd logp = probs.col(j).array().max(kLogFloor).log();
    const double entropy = -(probs.col(j).array() * logp).sum();
    const double value_error = returns[i] - pass.values(j);
    loss.policy -= logp(actions[i]) * advantages[i] * inv;
    loss.value += value_error * value_error * inv;
    loss.entropy += entropy * inv;
    if (grads) {
      Eigen::VectorXd g = advantages[i] * probs.col(j);
      g(actions[i]) -= advantages[i];
      g.array() += config.entropy_coef * probs.col(j).array() * (logp + entropy);
      grads->logits[0].col(j) = g * inv;
      grads->values(j) = -2.0 * config.value_coef * value_error * inv;
    }
  }
  loss.total = loss.policy + config.value_coef * loss.value - config.entropy_coef * loss.entropy;
  return loss;
}

void set_teacher_mask(ModelParams& params) {
  params.set_all_trainable(false);
  params.set_trunk_trainable(true);
  params.set_trainable(params.value_group(), true);
  params.set_trainable(params.policy_group(0), true);
}

A2CLoss a2c_gradients(const ModelParams& params, const RolloutBatch& batch, const ReturnsAdvantages& targets,
                      const A2CConfig& config, GradBuffer& grads) {
  const ForwardPass pass = forward_batch(params, batch.observations, 1);
  OutputGradients out;
  const A2CLoss loss = a2c_loss(pass, batch.actions, targets.returns, targets.advantages, config, &out);
  if (!std::isfinite(loss.total)) throw TrainingError("A2C loss is not finite");
  backward_batch(params, pass, out, grads);
  return loss;
}

A2CLoss a2c_update(ModelParams& params, const RolloutBatch& batch, const ReturnsAdvantages& targets,
                   const A2CConfig& config, AdamState& optimizer) {
  GradBuffer grads = GradBuffer::like(params);
  const A2CLoss loss = a2c_gradients(params, batch, targets, config, grads);
  clip_grad_norm(grads, config.max_grad_norm);
  AdamConfig adam;
  adam.lr = config.lr;
  adam_step(params, grads, optimizer, adam);
  return loss;
}

Eigen::VectorXd estimate_input_offset(const EnvConfig& env_config, std::size_t steps, std::uint64_t seed) {
  Environment env(env_config);
  EpisodeSeeder seeds(derive_seed(env_config.seed, {seed}), 0x63656e74);
  Rng rng(derive_seed(seed, {0x63656e74}));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(env.observation_size()));
  Observation obs = env.reset(seeds.next());
  for (std::size_t i = 0; i < steps; ++i) {
    sum += to_vector(obs);
    StepResult step = env.step(static_cast<ActionId>(uniform_below(rng, static_cast<std::uint64_t>(env.num_actions()))));
    obs = step.done ? env.reset(seeds.next()) : std::move(step.observation);
  }
  return steps > 0 ? Eigen::VectorXd(sum / static_cast<double>(steps)) : sum;
}

TeacherResult train_teacher(const EnvConfig& env_config, ModelParams initial, const A2CConfig& config) {
  config.validate();
  TeacherResult result;
  result.params = std::move(initial);
  set_teacher_mask(result.params);
  if (config.total_steps == 0) return result;
  if (config.center_probe_steps > 0) {
    const std::size_t probe = std::min(config.center_probe_steps, config.total_steps);
    result.params.set_input_offset(estimate_input_offset(env_config, probe, config.seed));
    result.env_steps += probe;
  }

  std::vector<RolloutWorker> workers = make_workers(env_config, config.workers, config.seed);
  Rng rng(derive_seed(config.seed, {0x726f6c6c}));
  AdamState optimizer = AdamState::like(result.params);
  std::vector<EpisodeRecord> finished;
  std::size_t next_eval = config.eval_interval;
  std::size_t updates_since = 0;
  A2CLoss sums;
  double last_mean_return = 0.0;
  std::size_t finished_since = 0;

  while (result.env_steps < config.total_steps) {
    const std::size_t before = finished.size();
    const RolloutBatch batch = collect_rollout(workers, result.params, config, rng, &finished);
    result.env_steps += batch.size();
    const ReturnsAdvantages targets = compute_returns_and_advantages(batch, config.gamma);
    const A2CLoss loss = a2c_update(result.params, batch, targets, config, optimizer);
    sums.policy += loss.policy;
    sums.value += loss.value;
    sums.entropy += loss.entropy;
    ++updates_since;
    finished_since += finished.size() - before;

    if (result.env_steps >= next_eval || result.env_steps >= config.total_steps) {
      next_eval += config.eval_interval;
      TeacherCurveRow row;
      row.step = result.env_steps;
      row.episodes = finished.size();
      if (finished_since > 0) {
        double total = 0.0;
        for (std::size_t i = finished.size() - finished_since; i < finished.size(); ++i) {
          total += finished[i].episode_return;
        }
        last_mean_return = total / static_cast<double>(finished_since);
      }
      row.mean_return = last_mean_return;
      const EvalResult eval = evaluate_policy(result.params, env_config, config.eval_episodes, 1,
                                              derive_seed(config.seed, {0x6576616c, row.step}));
      row.success_rate = eval.success_rate;
      const auto n = static_cast<double>(updates_since);
      row.policy_loss = sums.policy / n;
      row.value_loss = sums.value / n;
      row.entropy = sums.entropy / n;
      result.curve.push_back(row);
      sums = {};
      updates_since = 0;
      finished_since = 0;
    }
  }
  result.episodes = finished.size();
  return result;
}

}  // namespace phrlab
