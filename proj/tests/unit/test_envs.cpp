#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <map>

#include "phrlab/envs.h"
#include "phrlab/error.h"
#include "phrlab/seeding.h"
#include "support/oracles.h"

using namespace phrlab;

namespace {

int hot_index(const Observation& obs, std::size_t begin, std::size_t end) {
  int found = -1;
  for (std::size_t i = begin; i < end; ++i) {
    if (obs[i] == 1.0f) {
      EXPECT_EQ(found, -1) << "more than one hot slot";
      found = static_cast<int>(i - begin);
    } else {
      EXPECT_EQ(obs[i], 0.0f);
    }
  }
  return found;
}

}  // namespace

TEST(EnvConfig, DefaultsPerKind) {
  EXPECT_EQ(EnvConfig::defaults(EnvKind::FourRooms).max_steps, 400);
  EXPECT_EQ(EnvConfig::defaults(EnvKind::Crossing).max_steps, 324);
  EXPECT_EQ(EnvConfig::defaults(EnvKind::MiniPong).max_steps, 3000);
  EXPECT_EQ(EnvConfig::defaults(EnvKind::Crossing).width, 9);
}

TEST(EnvConfig, RejectsBadDimensions) {
  EnvConfig c = EnvConfig::defaults(EnvKind::Crossing);
  c.width = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EnvConfig::defaults(EnvKind::Crossing);
  c.max_steps = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EnvConfig::defaults(EnvKind::FourRooms);
  c.width = 15;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_env_kind("Maze"), ConfigError);
}

TEST(FourRooms, LayoutIdenticalForEverySeed) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(1);
  const GridState first = env.grid_state();
  for (std::uint64_t seed : {2ULL, 77ULL, 123456789ULL}) {
    env.reset(seed);
    EXPECT_EQ(env.grid_state(), first);
  }
  EXPECT_EQ(first.agent, (Cell{1, 1}));
  EXPECT_EQ(first.dir, Direction::E);
  EXPECT_EQ(first.goal, (Cell{11, 11}));
}

TEST(FourRooms, FourRoomsHaveFourDoorways) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  const GridState& s = env.grid_state();
  // Interior cells on the dividing column/row that are open.
  int openings = 0;
  for (int r = 1; r < 12; ++r) openings += s.wall(r, 6) ? 0 : 1;
  for (int c = 1; c < 6; ++c) openings += s.wall(6, c) ? 0 : 1;
  for (int c = 7; c < 12; ++c) openings += s.wall(7, c) ? 0 : 1;
  EXPECT_EQ(openings, 4);
}

TEST(FourRooms, ObservationLength) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  EXPECT_EQ(env.reset(0).size(), 680u);
  EXPECT_EQ(observation_size(EnvConfig::defaults(EnvKind::FourRooms)), 680u);
  EXPECT_EQ(observation_size(EnvConfig::defaults(EnvKind::Crossing)), 9u * 9u * 4u + 4u);
  EXPECT_EQ(observation_size(EnvConfig::defaults(EnvKind::MiniPong)), 7u);
}

TEST(FourRooms, EncodingIsOneHotPerCell) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  const Observation obs = env.reset(0);
  const GridState& s = env.grid_state();
  for (int r = 0; r < 13; ++r) {
    for (int c = 0; c < 13; ++c) {
      const auto base = static_cast<std::size_t>((r * 13 + c) * 4);
      const int channel = hot_index(obs, base, base + 4);
      const int expected = s.wall(r, c) ? 1 : (Cell{r, c} == s.agent ? 3 : (Cell{r, c} == s.goal ? 2 : 0));
      EXPECT_EQ(channel, expected) << r << "," << c;
    }
  }
  EXPECT_EQ(hot_index(obs, 676, 680), static_cast<int>(Direction::E));
}

TEST(FourRooms, RotationChangesOnlyDirectionSlots) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  Observation before = env.reset(0);
  for (ActionId turn : {kTurnLeft, kTurnRight}) {
    const Observation after = env.step(turn).observation;
    for (std::size_t i = 0; i < 676; ++i) ASSERT_EQ(before[i], after[i]) << i;
    EXPECT_NE(std::vector<float>(before.begin() + 676, before.end()), std::vector<float>(after.begin() + 676, after.end()));
    before = after;
  }
}

TEST(FourRooms, TurnsCycleThroughDirections) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  env.step(kTurnRight);
  EXPECT_EQ(env.grid_state().dir, Direction::S);
  env.step(kTurnLeft);
  env.step(kTurnLeft);
  EXPECT_EQ(env.grid_state().dir, Direction::N);
}

TEST(FourRooms, ForwardIntoWallKeepsPosition) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  env.step(kTurnLeft);  // facing N at (1,1): the outer wall
  const StepResult r = env.step(kForward);
  EXPECT_EQ(env.grid_state().agent, (Cell{1, 1}));
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(FourRooms, BfsPathReachesGoalWithDecayedReward) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  const auto path = oracle::bfs_optimal_path(env.grid_state());
  ASSERT_TRUE(path.has_value());
  StepResult last;
  for (std::size_t i = 0; i < path->size(); ++i) {
    ASSERT_FALSE(env.done());
    last = env.step((*path)[i]);
    EXPECT_EQ(last.done, i + 1 == path->size());
  }
  EXPECT_EQ(env.grid_state().agent, env.grid_state().goal);
  EXPECT_DOUBLE_EQ(last.reward, 1.0 - 0.9 * static_cast<double>(path->size()) / 400.0);
}

TEST(FourRooms, TimeoutEndsWithoutReward) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  StepResult r;
  for (int i = 0; i < 400; ++i) {
    ASSERT_FALSE(env.done());
    r = env.step(kTurnLeft);
  }
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_THROW(env.step(kForward), UsageError);
}

TEST(Environment, RejectsOutOfRangeActionsAndStepBeforeReset) {
  Environment env(EnvConfig::defaults(EnvKind::Crossing));
  EXPECT_THROW(env.step(kForward), UsageError);
  env.reset(3);
  EXPECT_THROW(env.step(3), UsageError);
  EXPECT_THROW(env.step(-1), UsageError);
  EXPECT_THROW(env.pong_state(), UsageError);
}

TEST(Crossing, GapIsTheOnlyOpeningInTheWall) {
  const EnvConfig config = EnvConfig::defaults(EnvKind::Crossing);
  Environment env(config);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env.reset(seed);
    const GridState& s = env.grid_state();
    const int gap = crossing_gap_row(config, seed);
    for (int r = 1; r < config.height - 1; ++r) EXPECT_EQ(s.wall(r, config.width / 2), r != gap);
  }
}

TEST(Crossing, EverySeedIsSolvable) {
  const EnvConfig config = EnvConfig::defaults(EnvKind::Crossing);
  Environment env(config);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    env.reset(seed);
    EXPECT_TRUE(oracle::bfs_optimal_actions(env.grid_state()).has_value()) << seed;
  }
}

TEST(Crossing, GapRowIsUniformOverInteriorRows) {
  const EnvConfig config = EnvConfig::defaults(EnvKind::Crossing);
  const std::vector<int> slots = crossing_gap_slots(config);
  ASSERT_EQ(slots.size(), static_cast<std::size_t>(config.height - 2));
  std::map<int, int> counts;
  constexpr int kSeeds = 10000;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) ++counts[crossing_gap_row(config, seed)];
  double chi2 = 0.0;
  const double expected = static_cast<double>(kSeeds) / static_cast<double>(slots.size());
  for (int row : slots) chi2 += (counts[row] - expected) * (counts[row] - expected) / expected;
  EXPECT_EQ(counts.size(), slots.size());
  const boost::math::chi_squared dist(static_cast<double>(slots.size() - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 " << chi2;
}

TEST(MiniPong, SameSeedSameEpisode) {
  Environment a(EnvConfig::defaults(EnvKind::MiniPong));
  Environment b(EnvConfig::defaults(EnvKind::MiniPong));
  a.reset(9);
  b.reset(9);
  Rng rng(5);
  while (!a.done()) {
    const auto action = static_cast<ActionId>(uniform_below(rng, 3));
    const StepResult ra = a.step(action);
    const StepResult rb = b.step(action);
    ASSERT_EQ(ra.observation, rb.observation);
    ASSERT_EQ(ra.reward, rb.reward);
  }
  EXPECT_EQ(a.pong_state(), b.pong_state());
}

TEST(MiniPong, RewardsTrackScoreAndEpisodeEndsAt21OrBudget) {
  Environment env(EnvConfig::defaults(EnvKind::MiniPong));
  env.reset(4);
  double differential = 0.0;
  while (!env.done()) {
    const double r = env.step(kNoop).reward;
    EXPECT_TRUE(r == 0.0 || r == 1.0 || r == -1.0);
    differential += r;
  }
  const PongState& s = env.pong_state();
  EXPECT_EQ(differential, s.score_player - s.score_opponent);
  EXPECT_TRUE(s.score_player == 21 || s.score_opponent == 21 || s.step_count == 3000);
}

TEST(MiniPong, BallTrackingPlayerBeatsTheOpponent) {
  Environment env(EnvConfig::defaults(EnvKind::MiniPong));
  env.reset(11);
  while (!env.done()) {
    const PongState& s = env.pong_state();
    const ActionId a = s.ball_y < s.paddle_player ? kUp : (s.ball_y > s.paddle_player ? kDown : kNoop);
    env.step(a);
  }
  EXPECT_GT(env.pong_state().score_player, env.pong_state().score_opponent);
}

TEST(MiniPong, ObservationIsNormalized) {
  Environment env(EnvConfig::defaults(EnvKind::MiniPong));
  Observation obs = env.reset(1);
  ASSERT_EQ(obs.size(), 7u);
  for (int i = 0; i < 200 && !env.done(); ++i) {
    for (float v : obs) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LE(v, 1.0f);
    }
    obs = env.step(static_cast<ActionId>(i % 3)).observation;
  }
}

TEST(Environment, RenderShowsAgentAndGoal) {
  Environment env(EnvConfig::defaults(EnvKind::FourRooms));
  env.reset(0);
  const std::string text = env.render();
  EXPECT_NE(text.find('>'), std::string::npos);
  EXPECT_NE(text.find('G'), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
}
