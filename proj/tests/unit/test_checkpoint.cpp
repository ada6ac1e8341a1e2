#include <gtest/gtest.h>

#include <filesystem>

#include "phrlab/checkpoint.h"
#include "phrlab/error.h"
#include "phrlab/seeding.h"

using namespace phrlab;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.stage = Stage::PhrStudent;
  c.seed = 17;
  c.env = EnvConfig::defaults(EnvKind::Crossing, 4);
  c.training.env_steps = 1234;
  c.training.updates = 56;
  c.training.measure = Measure::CrossEntropy;
  c.training.lambda = 1.0;
  c.training.stride = 2;
  c.training.horizon = 4;
  NetSpec spec;
  spec.input_dim = observation_size(c.env);
  spec.hidden_layers = {8};
  spec.head_width = 8;
  spec.n_heads = 4;
  spec.n_actions = 3;
  c.params = ModelParams::initialize(spec, 3);
  c.params.set_trunk_trainable(false);
  Eigen::VectorXd offset = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.input_dim), 0.25);
  c.params.set_input_offset(offset);
  return c;
}

}  // namespace

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(fnv1a64({reinterpret_cast<const std::uint8_t*>(a.data()), a.size()}), 0xaf63dc4c8601ec8cULL);
}

TEST(Checkpoint, RoundTripIsExact) {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 10), "PHRCKPT 1\n");
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back.version, kCheckpointVersion);
  EXPECT_EQ(back.stage, Stage::PhrStudent);
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.env, c.env);
  EXPECT_EQ(back.training, c.training);
  EXPECT_TRUE(back.params == c.params);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, EveryTruncationIsDetected) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 16) {
    EXPECT_THROW(parse_checkpoint(std::string_view(bytes).substr(0, len)), CorruptionError) << len;
  }
}

TEST(Checkpoint, SingleByteCorruptionOfPayloadIsDetected) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  const std::size_t payload_start = bytes.find('\n', bytes.find('\n') + 1) + 1;
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string bad = bytes;
    const std::size_t pos = payload_start + rng() % (bytes.size() - payload_start);
    bad[pos] = static_cast<char>(bad[pos] ^ (1 + rng() % 255));
    EXPECT_THROW(parse_checkpoint(bad), CorruptionError) << pos;
  }
}

TEST(Checkpoint, VersionMismatchNamesBothVersions) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes.replace(0, 9, "PHRCKPT 2");
  try {
    parse_checkpoint(bytes);
    FAIL() << "expected IncompatibleError";
  } catch (const IncompatibleError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('1'), std::string::npos);
  }
}

TEST(Checkpoint, WrongMagicIsCorruption) {
  EXPECT_THROW(parse_checkpoint("PHREXP 1\n{}\n"), CorruptionError);
}

TEST(Checkpoint, FileRoundTripAndMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "phrlab_ckpt_test" / "a.ckpt";
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(path, c);
  EXPECT_TRUE(load_checkpoint(path).params == c.params);
  std::filesystem::remove_all(path.parent_path());
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Experience, RoundTripIsExact) {
  Trajectory t;
  t.terminal = true;
  t.final_reward = 0.75;
  for (int i = 0; i < 3; ++i) {
    t.steps.push_back({{0.5f, -1.0f, static_cast<float>(i)}, {0.2, 0.3, 0.5}, static_cast<ActionId>(i), i == 2 ? 0.75 : 0.0});
  }
  const std::vector<Trajectory> in = {t, t};
  const std::string bytes = serialize_experience(in);
  EXPECT_EQ(bytes.substr(0, 9), "PHREXP 1\n");
  const auto out = parse_experience(bytes);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].final_reward, 0.75);
  EXPECT_TRUE(out[1].terminal);
  ASSERT_EQ(out[1].steps.size(), 3u);
  EXPECT_EQ(out[1].steps[2].observation, t.steps[2].observation);
  EXPECT_EQ(out[1].steps[2].teacher_policy, t.steps[2].teacher_policy);
  EXPECT_EQ(out[1].steps[2].action, 2);
  EXPECT_THROW(parse_experience(std::string_view(bytes).substr(0, bytes.size() - 1)), CorruptionError);
}
