#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "phrlab/a2c.h"
#include "phrlab/envs.h"
#include "phrlab/nn.h"

namespace phrlab {

enum class Measure { SquaredDistance, KLDivergence, CrossEntropy };

std::string_view to_string(Measure measure);
/// Accepts the short CLI names (l2, kl, ce) and the long names.
Measure parse_measure(std::string_view name);

struct PhrConfig {
  std::size_t horizon = 4;
  std::size_t stride = 1;  // alpha: keep anchors t with t % stride == 0
  double lambda = 1.0;
  Measure measure = Measure::CrossEntropy;
  std::size_t episodes = 1000;  // K
  bool trunk_frozen = true;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  /// Minibatch updates per batch_size freshly extracted sub-sequences.
  std::size_t replay_ratio = 8;
  std::size_t replay_capacity = 20000;
  std::size_t validation_episodes = 20;
  std::size_t validation_interval = 50;  // episodes between agreement measurements
  /// Adds the A2C gradient of pi_1 to every update (combined objective); off by default.
  bool add_policy_gradient = false;
  std::size_t probe_window = 200;  // episodes before the keep-rate check

  void validate() const;
  bool operator==(const PhrConfig&) const = default;
};

/// Lambda default per measure: 0.1 for KL, 1.0 otherwise.
double default_lambda(Measure measure);

struct TrajectoryStep {
  Observation observation;
  std::vector<double> teacher_policy;
  ActionId action = 0;
  double reward = 0.0;
};

/// One episode of the teacher: only states where an action was taken are
/// stored, so steps.size() == episode length m.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  bool terminal = false;
  double final_reward = 0.0;

  std::size_t length() const { return steps.size(); }
};

/// Window of n consecutive states. `anchor` is 0-based; the 1-based index t of
/// the sub-sequence is anchor + 1.
struct SubSequence {
  std::shared_ptr<const Trajectory> trajectory;
  std::size_t anchor = 0;
  std::size_t horizon = 0;

  std::size_t t() const { return anchor + 1; }
  const Observation& anchor_observation() const { return trajectory->steps[anchor].observation; }
  /// Teacher distribution that head `head` (0-based, >= 1) must reproduce: pi_1(.|s_{t+head}).
  const std::vector<double>& target(std::size_t head) const { return trajectory->steps[anchor + head].teacher_policy; }
};

/// Anchors t in 1..m-n+1 with t % stride == 0; empty when m < n.
std::vector<SubSequence> extract_subsequences(const std::shared_ptr<const Trajectory>& trajectory, std::size_t horizon,
                                              std::size_t stride);

/// Scalar distance between a student distribution and a teacher target.
/// Throws UsageError when the target is not a normalized distribution.
double measure_loss(std::span<const double> student, std::span<const double> target, Measure measure);

/// dLoss/dLogits of measure_loss for a student distribution produced by softmax.
Eigen::VectorXd measure_logit_gradient(std::span<const double> student, std::span<const double> target,
                                       Measure measure);

/// Samples teacher episodes (actions drawn from pi_1) and keeps those whose
/// final reward is positive, until `count` are kept. Throws TrainingError when
/// fewer than 1% of the first `probe_window` episodes succeed.
std::vector<Trajectory> collect_experience(const ModelParams& teacher, Environment& env, EpisodeSeeder& seeds,
                                           std::size_t count, Rng& rng, std::size_t probe_window = 200);

/// Batch-mean of sum_{i=2..n} measure(pi_i(.|s_t), pi_1(.|s_{t+i-1})), times lambda,
/// with the matching output gradients. `pass` must hold `horizon` heads for the anchors.
double phr_loss(const ForwardPass& pass, std::span<const SubSequence> batch, const PhrConfig& config,
                OutputGradients* grads);

/// Stage-2 mask: heads 2..horizon trainable, trunk trainable iff !trunk_frozen,
/// head 1 and value head frozen.
void set_student_mask(ModelParams& params, const PhrConfig& config);

/// One optimizer step on the PHR loss (semi-gradient: stored teacher targets are constants).
double phr_update(ModelParams& params, std::span<const SubSequence> batch, const PhrConfig& config,
                  AdamState& optimizer);

/// Fraction of anchors where argmax pi_i(.|s_t) == argmax pi_1(.|s_{t+i-1}), for i = 2..horizon.
std::vector<double> head_agreement(const ModelParams& params, std::span<const Trajectory> trajectories,
                                   std::size_t horizon);

struct PhrCurveRow {
  std::size_t update = 0;
  double loss = 0.0;
  std::vector<double> agreement;  // heads 2..n
};

struct PhrResult {
  ModelParams params;
  std::vector<PhrCurveRow> curve;
  std::vector<double> final_agreement;
  std::size_t updates = 0;
  std::size_t kept_episodes = 0;
};

/// Stage 2: K episodes of experience collection alternating with PHR updates.
/// `a2c` is used only when config.add_policy_gradient is set.
PhrResult train_phr(const ModelParams& teacher, const EnvConfig& env_config, const PhrConfig& config,
                    const A2CConfig& a2c = {});

/// Held-out successful teacher trajectories for validation, from a seed stream
/// disjoint from the training stream.
std::vector<Trajectory> validation_trajectories(const ModelParams& teacher, const EnvConfig& env_config,
                                                std::size_t count, std::uint64_t seed);

}  // namespace phrlab
