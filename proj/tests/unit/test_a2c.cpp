#include <gtest/gtest.h>

#include <cmath>

#include "phrlab/a2c.h"
#include "phrlab/error.h"

using namespace phrlab;

namespace {

RolloutBatch manual_batch(std::vector<double> rewards, std::vector<bool> dones, std::vector<double> values,
                          double bootstrap) {
  RolloutBatch b;
  b.workers = 1;
  b.steps = rewards.size();
  b.rewards = std::move(rewards);
  b.dones = std::move(dones);
  b.values = std::move(values);
  b.bootstrap_values = {bootstrap};
  return b;
}

NetSpec grid_spec(const EnvConfig& env, std::size_t heads) {
  NetSpec spec;
  spec.input_dim = observation_size(env);
  spec.n_actions = 3;
  spec.hidden_layers = {32};
  spec.head_width = 32;
  spec.n_heads = heads;
  return spec;
}

}  // namespace

TEST(Returns, TerminalRewardDiscountsBackwards) {
  const auto b = manual_batch({0.0, 0.0, 1.0}, {false, false, true}, {0.0, 0.0, 0.0}, 5.0);
  const ReturnsAdvantages r = compute_returns_and_advantages(b, 0.9);
  EXPECT_NEAR(r.returns[0], 0.81, 1e-12);
  EXPECT_NEAR(r.returns[1], 0.9, 1e-12);
  EXPECT_NEAR(r.returns[2], 1.0, 1e-12);
}

TEST(Returns, BootstrapsFromLastValueWhenNotDone) {
  const auto b = manual_batch({0.0, 0.0, 0.0}, {false, false, false}, {0.1, 0.2, 0.3}, 2.0);
  const ReturnsAdvantages r = compute_returns_and_advantages(b, 0.5);
  EXPECT_NEAR(r.returns[2], 1.0, 1e-12);
  EXPECT_NEAR(r.returns[1], 0.5, 1e-12);
  EXPECT_NEAR(r.returns[0], 0.25, 1e-12);
  EXPECT_NEAR(r.advantages[0], 0.15, 1e-12);
  EXPECT_NEAR(r.advantages[2], 0.7, 1e-12);
}

TEST(Returns, EpisodeBoundaryStopsBootstrap) {
  const auto b = manual_batch({1.0, 0.0, 0.0}, {true, false, false}, {0.0, 0.0, 0.0}, 4.0);
  const ReturnsAdvantages r = compute_returns_and_advantages(b, 0.5);
  EXPECT_NEAR(r.returns[0], 1.0, 1e-12);
  EXPECT_NEAR(r.returns[1], 1.0, 1e-12);
  EXPECT_NEAR(r.returns[2], 2.0, 1e-12);
}

TEST(A2CLoss, MatchesHandComputationForOneSample) {
  ForwardPass pass;
  pass.activations.push_back(Eigen::MatrixXd::Zero(1, 1));
  Eigen::MatrixXd probs(3, 1);
  probs << 0.2, 0.5, 0.3;
  pass.probabilities.push_back(probs);
  pass.logits.push_back(probs.array().log().matrix());
  pass.values = Eigen::RowVectorXd::Constant(1, 0.4);
  A2CConfig config;
  const std::vector<ActionId> actions = {1};
  const std::vector<double> returns = {1.0};
  const std::vector<double> advantages = {0.6};
  const A2CLoss loss = a2c_loss(pass, actions, returns, advantages, config, nullptr);
  const double entropy = -(0.2 * std::log(0.2) + 0.5 * std::log(0.5) + 0.3 * std::log(0.3));
  EXPECT_NEAR(loss.policy, -std::log(0.5) * 0.6, 1e-12);
  EXPECT_NEAR(loss.value, 0.36, 1e-12);
  EXPECT_NEAR(loss.entropy, entropy, 1e-12);
  EXPECT_NEAR(loss.total, loss.policy + 0.5 * 0.36 - 0.01 * entropy, 1e-12);
}

TEST(A2CConfig, RejectsInvalidValues) {
  A2CConfig c;
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.workers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Rollout, ShapesAndAutoReset) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 1);
  const ModelParams p = ModelParams::initialize(grid_spec(env, 2), 1);
  A2CConfig config;
  config.workers = 3;
  config.rollout_len = 400;  // longer than an episode: every worker must reset
  auto workers = make_workers(env, config.workers, 7);
  Rng rng(1);
  std::vector<EpisodeRecord> finished;
  const RolloutBatch b = collect_rollout(workers, p, config, rng, &finished);
  EXPECT_EQ(b.size(), 1200u);
  EXPECT_EQ(b.observations.cols(), 1200);
  EXPECT_EQ(b.policies.rows(), 3);
  EXPECT_EQ(b.bootstrap_values.size(), 3u);
  std::size_t dones = 0;
  for (bool d : b.dones) dones += d ? 1 : 0;
  EXPECT_GE(dones, 3u);
  EXPECT_EQ(finished.size(), dones);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b.policies.col(static_cast<Eigen::Index>(i)).sum(), 1.0, 1e-12);
}

TEST(Rollout, SameSeedsSameBatch) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 2);
  const ModelParams p = ModelParams::initialize(grid_spec(env, 1), 3);
  A2CConfig config;
  auto wa = make_workers(env, 4, 9);
  auto wb = make_workers(env, 4, 9);
  Rng ra(5), rb(5);
  const RolloutBatch a = collect_rollout(wa, p, config, ra);
  const RolloutBatch b = collect_rollout(wb, p, config, rb);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_EQ(a.rewards, b.rewards);
}

TEST(A2CUpdate, LeavesHeadsTwoToNBitIdentical) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 3);
  ModelParams p = ModelParams::initialize(grid_spec(env, 4), 4);
  set_teacher_mask(p);
  const ModelParams before = p;
  A2CConfig config;
  auto workers = make_workers(env, 4, 1);
  Rng rng(2);
  AdamState opt = AdamState::like(p);
  for (int i = 0; i < 5; ++i) {
    const RolloutBatch b = collect_rollout(workers, p, config, rng);
    a2c_update(p, b, compute_returns_and_advantages(b, config.gamma), config, opt);
  }
  for (std::size_t h = 1; h < 4; ++h) {
    EXPECT_EQ(p.group(p.policy_group(h)).weight, before.group(p.policy_group(h)).weight);
    EXPECT_EQ(p.group(p.policy_group(h)).bias, before.group(p.policy_group(h)).bias);
  }
  EXPECT_NE(p.group(p.policy_group(0)).weight, before.group(p.policy_group(0)).weight);
  EXPECT_NE(p.group(p.trunk_group(0)).weight, before.group(p.trunk_group(0)).weight);
  EXPECT_NE(p.group(p.value_group()).weight, before.group(p.value_group()).weight);
}

TEST(InputOffset, ProbeMeanRemovesConstantFeatures) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::FourRooms);
  const Eigen::VectorXd offset = estimate_input_offset(env, 200, 1);
  Environment e(env);
  const Eigen::VectorXd obs = to_vector(e.reset(0));
  // Wall cells never change, so their centered encoding is exactly zero.
  for (int c = 0; c < 13; ++c) {
    const auto slot = static_cast<Eigen::Index>(c * 4 + 1);
    EXPECT_EQ(obs(slot) - offset(slot), 0.0);
  }
}

TEST(TrainTeacher, ZeroStepsReturnsInitialParams) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 1);
  const ModelParams init = ModelParams::initialize(grid_spec(env, 2), 1);
  A2CConfig config;
  config.total_steps = 0;
  const TeacherResult r = train_teacher(env, init, config);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(r.env_steps, 0u);
  EXPECT_EQ(r.params.flatten(), init.flatten());
}

TEST(TrainTeacher, DeterministicForSameSeed) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 1);
  const ModelParams init = ModelParams::initialize(grid_spec(env, 2), 1);
  A2CConfig config;
  config.total_steps = 3000;
  config.eval_interval = 1000;
  config.eval_episodes = 2;
  config.seed = 5;
  const TeacherResult a = train_teacher(env, init, config);
  const TeacherResult b = train_teacher(env, init, config);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.curve.size(), b.curve.size());
  EXPECT_GE(a.env_steps, 3000u);
  config.seed = 6;
  EXPECT_FALSE(train_teacher(env, init, config).params == a.params);
}
