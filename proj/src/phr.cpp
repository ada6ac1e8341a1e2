#include "phrlab/phr.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "phrlab/error.h"

namespace phrlab {
namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kNormTolerance = 1e-6;

void check_distributions(std::span<const double> student, std::span<const double> target) {
  if (student.size() != target.size() || target.empty()) {
    throw UsageError("student and target distributions differ in length");
  }
  double sum = 0.0;
  for (double q : target) {
    if (!(q >= 0.0)) throw UsageError("target distribution has a negative or NaN entry");
    sum += q;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw UsageError("target distribution is not normalized (sums to " + std::to_string(sum) + ")");
  }
}

std::size_t target_action(std::span<const double> target) { return argmax(target); }

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

double phr_gradients(const ModelParams& params, std::span<const SubSequence> batch, const PhrConfig& config,
                     GradBuffer& grads) {
  std::vector<Observation> anchors;
  anchors.reserve(batch.size());
  for (const auto& sub : batch) anchors.push_back(sub.anchor_observation());
  const ForwardPass pass = forward_batch(params, to_matrix(anchors), config.horizon);
  OutputGradients out;
  const double loss = phr_loss(pass, batch, config, &out);
  if (!std::isfinite(loss)) throw TrainingError("PHR loss is not finite");
  backward_batch(params, pass, out, grads);
  return loss;
}

Trajectory run_teacher_episode(const ModelParams& teacher, Environment& env, std::uint64_t episode_seed, Rng& rng) {
  Trajectory traj;
  Observation obs = env.reset(episode_seed);
  while (!env.done()) {
    const PolicyVectorOutput out = forward(teacher, obs, 1);
    const std::vector<double>& probs = out.distributions[0];
    const double u = uniform01(rng);
    double acc = 0.0;
    ActionId action = static_cast<ActionId>(probs.size() - 1);
    for (std::size_t a = 0; a < probs.size(); ++a) {
      acc += probs[a];
      if (u < acc) {
        action = static_cast<ActionId>(a);
        break;
      }
    }
    StepResult step = env.step(action);
    traj.steps.push_back({std::move(obs), probs, action, step.reward});
    obs = std::move(step.observation);
    if (step.done) {
      traj.terminal = true;
      traj.final_reward = step.reward;
    }
  }
  return traj;
}

}  // namespace

std::string_view to_string(Measure measure) {
  switch (measure) {
    case Measure::SquaredDistance: return "l2";
    case Measure::KLDivergence: return "kl";
    case Measure::CrossEntropy: return "ce";
  }
  return "?";
}

Measure parse_measure(std::string_view name) {
  if (name == "l2" || name == "d2" || name == "SquaredDistance") return Measure::SquaredDistance;
  if (name == "kl" || name == "KLDivergence") return Measure::KLDivergence;
  if (name == "ce" || name == "CrossEntropy") return Measure::CrossEntropy;
  throw ConfigError("unknown measure '" + std::string(name) + "' (expected l2, kl or ce)");
}

double default_lambda(Measure measure) { return measure == Measure::KLDivergence ? 0.1 : 1.0; }

void PhrConfig::validate() const {
  if (horizon < 2) throw ConfigError("phr.horizon must be >= 2: nothing to distill with a single head");
  if (stride < 1) throw ConfigError("phr.stride must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("phr.lambda must be > 0");
  if (!(lr > 0.0)) throw ConfigError("phr.lr must be > 0");
  if (batch_size < 1) throw ConfigError("phr.batch_size must be >= 1");
  if (replay_ratio < 1) throw ConfigError("phr.replay_ratio must be >= 1");
  if (replay_capacity < batch_size) throw ConfigError("phr.replay_capacity must be >= phr.batch_size");
  if (validation_interval < 1) throw ConfigError("phr.validation_interval must be >= 1");
  if (probe_window < 1) throw ConfigError("phr.probe_window must be >= 1");
}

std::vector<SubSequence> extract_subsequences(const std::shared_ptr<const Trajectory>& trajectory, std::size_t horizon,
                                              std::size_t stride) {
  std::vector<SubSequence> out;
  const std::size_t m = trajectory->length();
  if (horizon < 1 || stride < 1 || m < horizon) return out;
  for (std::size_t t = stride; t <= m - horizon + 1; t += stride) out.push_back({trajectory, t - 1, horizon});
  return out;
}

double measure_loss(std::span<const double> student, std::span<const double> target, Measure measure) {
  check_distributions(student, target);
  double loss = 0.0;
  switch (measure) {
    case Measure::SquaredDistance:
      for (std::size_t i = 0; i < student.size(); ++i) loss += (student[i] - target[i]) * (student[i] - target[i]);
      break;
    case Measure::KLDivergence:
      for (std::size_t i = 0; i < student.size(); ++i) {
        loss += student[i] * (std::log(std::max(student[i], kLogFloor)) - std::log(std::max(target[i], kLogFloor)));
      }
      break;
    case Measure::CrossEntropy:
      loss = -std::log(std::max(student[target_action(target)], kLogFloor));
      break;
  }
  return loss;
}

Eigen::VectorXd measure_logit_gradient(std::span<const double> student, std::span<const double> target,
                                       Measure measure) {
  check_distributions(student, target);
  const auto p = as_vector(student);
  Eigen::VectorXd grad(p.size());
  switch (measure) {
    case Measure::SquaredDistance:
      grad = softmax_backward(p, 2.0 * (p - as_vector(target)));
      break;
    case Measure::KLDivergence: {
      Eigen::VectorXd dp(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        dp(i) = std::log(std::max(student[k], kLogFloor)) - std::log(std::max(target[k], kLogFloor)) + 1.0;
      }
      grad = softmax_backward(p, dp);
      break;
    }
    case Measure::CrossEntropy:
      grad = p;
      grad(static_cast<Eigen::Index>(target_action(target))) -= 1.0;
      break;
  }
  return grad;
}

std::vector<Trajectory> collect_experience(const ModelParams& teacher, Environment& env, EpisodeSeeder& seeds,
                                           std::size_t count, Rng& rng, std::size_t probe_window) {
  std::vector<Trajectory> kept;
  std::size_t attempts = 0;
  while (kept.size() < count) {
    Trajectory traj = run_teacher_episode(teacher, env, seeds.next(), rng);
    ++attempts;
    if (traj.terminal && traj.final_reward > 0.0) kept.push_back(std::move(traj));
    if (attempts == probe_window && static_cast<double>(kept.size()) < 0.01 * static_cast<double>(attempts)) {
      throw TrainingError("teacher kept " + std::to_string(kept.size()) + " of " + std::to_string(attempts) +
                          " episodes (< 1%); the teacher is too weak to distill");
    }
  }
  return kept;
}

double phr_loss(const ForwardPass& pass, std::span<const SubSequence> batch, const PhrConfig& config,
                OutputGradients* grads) {
  const std::size_t heads = config.horizon;
  if (pass.probabilities.size() < heads) throw UsageError("forward pass holds fewer heads than the PHR horizon");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double scale = config.lambda / static_cast<double>(batch.size());
  if (grads) {
    grads->logits.assign(heads, Eigen::MatrixXd());
    for (std::size_t h = 1; h < heads; ++h) grads->logits[h] = Eigen::MatrixXd::Zero(pass.probabilities[h].rows(), n);
    grads->values.resize(0);
  }
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const SubSequence& sub = batch[static_cast<std::size_t>(j)];
    if (sub.horizon < heads) throw UsageError("sub-sequence shorter than the PHR horizon");
    for (std::size_t h = 1; h < heads; ++h) {
      const std::span<const double> student = column(pass.probabilities[h], j);
      loss += measure_loss(student, sub.target(h), config.measure);
      if (grads) grads->logits[h].col(j) = scale * measure_logit_gradient(student, sub.target(h), config.measure);
    }
  }
  return loss * scale;
}

void set_student_mask(ModelParams& params, const PhrConfig& config) {
  params.set_all_trainable(false);
  params.set_trunk_trainable(!config.trunk_frozen);
  for (std::size_t h = 1; h < std::min(config.horizon, params.spec().n_heads); ++h) {
    params.set_trainable(params.policy_group(h), true);
  }
}

double phr_update(ModelParams& params, std::span<const SubSequence> batch, const PhrConfig& config,
                  AdamState& optimizer) {
  if (config.horizon < 2) {
    std::cerr << "warning: PHR horizon 1 has nothing to distill; update skipped\n";
    return 0.0;
  }
  if (batch.empty()) return 0.0;
  set_student_mask(params, config);
  GradBuffer grads = GradBuffer::like(params);
  const double loss = phr_gradients(params, batch, config, grads);
  AdamConfig adam;
  adam.lr = config.lr;
  adam_step(params, grads, optimizer, adam);
  return loss;
}

std::vector<double> head_agreement(const ModelParams& params, std::span<const Trajectory> trajectories,
                                   std::size_t horizon) {
  std::vector<std::size_t> hits(horizon, 0);
  std::vector<std::size_t> totals(horizon, 0);
  for (const Trajectory& traj : trajectories) {
    if (traj.steps.empty()) continue;
    std::vector<Observation> states;
    states.reserve(traj.length());
    for (const auto& step : traj.steps) states.push_back(step.observation);
    const ForwardPass pass = forward_batch(params, to_matrix(states), horizon);
    for (std::size_t h = 1; h < horizon; ++h) {
      for (std::size_t t = 0; t + h < traj.length(); ++t) {
        const std::size_t predicted = argmax(column(pass.probabilities[h], static_cast<Eigen::Index>(t)));
        hits[h] += predicted == argmax(traj.steps[t + h].teacher_policy) ? 1 : 0;
        ++totals[h];
      }
    }
  }
  std::vector<double> out;
  for (std::size_t h = 1; h < horizon; ++h) {
    out.push_back(totals[h] ? static_cast<double>(hits[h]) / static_cast<double>(totals[h]) : 0.0);
  }
  return out;
}

std::vector<Trajectory> validation_trajectories(const ModelParams& teacher, const EnvConfig& env_config,
                                                std::size_t count, std::uint64_t seed) {
  Environment env(env_config);
  EpisodeSeeder seeds(derive_seed(env_config.seed, {seed}), 0x76616c);
  Rng rng(derive_seed(seed, {0x76616c}));
  return collect_experience(teacher, env, seeds, count, rng);
}

PhrResult train_phr(const ModelParams& teacher, const EnvConfig& env_config, const PhrConfig& config,
                    const A2CConfig& a2c) {
  config.validate();
  if (config.horizon > teacher.spec().n_heads) {
    throw ConfigError("phr.horizon " + std::to_string(config.horizon) + " exceeds the checkpoint's " +
                      std::to_string(teacher.spec().n_heads) + " heads");
  }
  PhrResult result;
  result.params = teacher;
  set_student_mask(result.params, config);

  const std::vector<Trajectory> validation =
      validation_trajectories(teacher, env_config, config.validation_episodes, derive_seed(config.seed, {0x686f6c64}));

  Environment env(env_config);
  EpisodeSeeder seeds(derive_seed(env_config.seed, {config.seed}), 0x70687231);
  Rng rng(derive_seed(config.seed, {0x70687232}));
  AdamState optimizer = AdamState::like(result.params);
  AdamConfig adam;
  adam.lr = config.lr;

  std::vector<RolloutWorker> workers;
  Rng rollout_rng(derive_seed(config.seed, {0x70687233}));
  if (config.add_policy_gradient) workers = make_workers(env_config, a2c.workers, config.seed);

  std::vector<SubSequence> pool;
  std::size_t pool_next = 0;
  std::vector<SubSequence> batch;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  for (std::size_t episode = 1; episode <= config.episodes; ++episode) {
    // Experience comes from the frozen teacher snapshot unless pi_1 itself is still being trained.
    const ModelParams& sampler = config.add_policy_gradient ? result.params : teacher;
    std::vector<Trajectory> fresh = collect_experience(sampler, env, seeds, 1, rng, config.probe_window);
    ++result.kept_episodes;
    auto traj = std::make_shared<const Trajectory>(std::move(fresh.front()));
    const std::vector<SubSequence> subs = extract_subsequences(traj, config.horizon, config.stride);
    for (const auto& sub : subs) {
      if (pool.size() < config.replay_capacity) {
        pool.push_back(sub);
      } else {
        pool[pool_next] = sub;
        pool_next = (pool_next + 1) % config.replay_capacity;
      }
    }
    const std::size_t updates = (subs.size() + config.batch_size - 1) / config.batch_size * config.replay_ratio;
    for (std::size_t u = 0; u < updates; ++u) {
      const std::size_t take = std::min(config.batch_size, pool.size());
      // Partial Fisher-Yates over the pool: a shuffled batch without replacement.
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      batch.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
      double loss = 0.0;
      if (config.add_policy_gradient) {
        set_student_mask(result.params, config);
        result.params.set_trainable(result.params.policy_group(0), true);
        result.params.set_trainable(result.params.value_group(), true);
        GradBuffer grads = GradBuffer::like(result.params);
        loss = phr_gradients(result.params, batch, config, grads);
        const RolloutBatch rollout = collect_rollout(workers, result.params, a2c, rollout_rng);
        a2c_gradients(result.params, rollout, compute_returns_and_advantages(rollout, a2c.gamma), a2c, grads);
        clip_grad_norm(grads, a2c.max_grad_norm);
        adam_step(result.params, grads, optimizer, adam);
      } else {
        loss = phr_update(result.params, batch, config, optimizer);
      }
      loss_sum += loss;
      ++loss_count;
      ++result.updates;
    }
    if (episode % config.validation_interval == 0 || episode == config.episodes) {
      PhrCurveRow row;
      row.update = result.updates;
      row.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
      row.agreement = head_agreement(result.params, validation, config.horizon);
      result.curve.push_back(std::move(row));
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
  set_student_mask(result.params, config);
  result.final_agreement = head_agreement(result.params, validation, config.horizon);
  return result;
}

}  // namespace phrlab
