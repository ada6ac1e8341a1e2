#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "phrlab/envs.h"
#include "phrlab/nn.h"
#include "phrlab/seeding.h"

namespace phrlab {

struct A2CConfig {
  std::size_t workers = 8;
  std::size_t rollout_len = 5;
  double gamma = 0.99;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::size_t total_steps = 300000;
  double lr = 1e-3;
  double max_grad_norm = 0.5;  // 0 disables clipping
  std::uint64_t seed = 0;
  std::size_t eval_interval = 20000;
  std::size_t eval_episodes = 10;
  /// Random-policy steps used to estimate the input centering before training; 0 keeps the initial offset.
  std::size_t center_probe_steps = 1000;

  void validate() const;
  bool operator==(const A2CConfig&) const = default;
};

/// One environment stream driven by a rollout worker; auto-resets on done.
struct RolloutWorker {
  Environment env;
  EpisodeSeeder seeds;
  Observation observation;
  double episode_return = 0.0;
  bool last_success = false;

  RolloutWorker(const EnvConfig& config, std::uint64_t run_seed, std::size_t index);
};

std::vector<RolloutWorker> make_workers(const EnvConfig& config, std::size_t count, std::uint64_t run_seed);

/// W workers x T steps; transition (w, t) lives at index w*T + t.
struct RolloutBatch {
  std::size_t workers = 0;
  std::size_t steps = 0;
  Eigen::MatrixXd observations;  // input_dim x (W*T)
  std::vector<ActionId> actions;
  std::vector<double> rewards;
  std::vector<bool> dones;
  Eigen::MatrixXd policies;  // logged pi_1, A x (W*T)
  std::vector<double> values;
  std::vector<double> bootstrap_values;  // V(s_T) per worker

  std::size_t size() const { return workers * steps; }
  std::size_t index(std::size_t worker, std::size_t step) const { return worker * steps + step; }
};

struct EpisodeRecord {
  double episode_return = 0.0;
  bool success = false;
};

/// Steps every worker T times, sampling actions from pi_1. Episodes that end
/// are appended to `finished` (when given).
RolloutBatch collect_rollout(std::vector<RolloutWorker>& workers, const ModelParams& params, const A2CConfig& config,
                             Rng& rng, std::vector<EpisodeRecord>* finished = nullptr);

struct ReturnsAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// R_t = r_t + gamma * R_{t+1} * (1 - done_t), seeded with R_T = V(s_T); advantage = R_t - V(s_t).
ReturnsAdvantages compute_returns_and_advantages(const RolloutBatch& batch, double gamma);

struct A2CLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;  // mean entropy of pi_1 over the batch
  double total = 0.0;
};

/// Batch-mean loss -log pi_1(a|s)*adv + value_coef*(R - V)^2 - entropy_coef*H(pi_1)
/// and its gradient w.r.t. head-1 logits and the value output. Advantages are constants.
A2CLoss a2c_loss(const ForwardPass& pass, std::span<const ActionId> actions, std::span<const double> returns,
                 std::span<const double> advantages, const A2CConfig& config, OutputGradients* grads);

/// Sets the stage-1 mask: trunk, value head and head 1 trainable; heads 2..n frozen.
void set_teacher_mask(ModelParams& params);

/// Accumulates the A2C gradient for `batch` into `grads` (mask of `params` applies).
A2CLoss a2c_gradients(const ModelParams& params, const RolloutBatch& batch, const ReturnsAdvantages& targets,
                      const A2CConfig& config, GradBuffer& grads);

/// One optimizer step on the A2C loss. Heads 2..n are left bit-identical.
A2CLoss a2c_update(ModelParams& params, const RolloutBatch& batch, const ReturnsAdvantages& targets,
                   const A2CConfig& config, AdamState& optimizer);

struct TeacherCurveRow {
  std::size_t step = 0;
  std::size_t episodes = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TeacherResult {
  ModelParams params;
  std::vector<TeacherCurveRow> curve;
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
};

/// Mean observation over `steps` uniformly random actions (episodes restart on done).
Eigen::VectorXd estimate_input_offset(const EnvConfig& env_config, std::size_t steps, std::uint64_t seed);

/// Stage 1: trains pi_1 with synchronous A2C for `total_steps` environment steps
/// (the centering probe counts towards the budget).
TeacherResult train_teacher(const EnvConfig& env_config, ModelParams initial, const A2CConfig& config);

}  // namespace phrlab
