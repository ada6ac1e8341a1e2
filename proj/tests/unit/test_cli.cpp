#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "phrlab/checkpoint.h"
#include "phrlab/cli.h"
#include "phrlab/nn.h"

using namespace phrlab;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("phrlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "crossing.json").string();
    write_file(config_, R"({
      "env": {"kind": "Crossing", "seed": 1},
      "net": {"hidden_layers": [16], "head_width": 16, "n_heads": 4},
      "a2c": {"total_steps": 2000, "eval_interval": 1000, "eval_episodes": 2, "center_probe_steps": 100},
      "phr": {"episodes": 4, "validation_episodes": 2, "validation_interval": 2}
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string teacher_checkpoint(bool spinning = false) {
    Checkpoint c;
    c.env = EnvConfig::defaults(EnvKind::Crossing, 1);
    NetSpec spec;
    spec.input_dim = observation_size(c.env);
    spec.hidden_layers = {16};
    spec.head_width = 16;
    spec.n_heads = 4;
    spec.n_actions = 3;
    c.params = ModelParams::initialize(spec, 5);
    if (spinning) c.params.group(c.params.policy_group(0)).bias(kTurnLeft) = 50.0;
    const std::string path = (dir_ / (spinning ? "spin.ckpt" : "teacher.ckpt")).string();
    save_checkpoint(path, c);
    return path;
  }

  fs::path dir_;
  std::string config_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"train-teacher"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--checkpoint", "x", "--out", dir_.string()}).code, kExitUsage);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, kExitOk); }

TEST_F(CliTest, TrainTeacherWritesOutputsDeterministically) {
  const std::string a = (dir_ / "a").string(), b = (dir_ / "b").string();
  ASSERT_EQ(run({"train-teacher", "--config", config_, "--seed", "3", "--out", a}).code, kExitOk);
  ASSERT_EQ(run({"train-teacher", "--config", config_, "--seed", "3", "--out", b}).code, kExitOk);
  for (const char* name : {"teacher.ckpt", "teacher_curve.csv"}) {
    EXPECT_EQ(read_file(fs::path(a) / name), read_file(fs::path(b) / name)) << name;
  }
  EXPECT_TRUE(fs::exists(fs::path(a) / "effective_config.json"));
  EXPECT_EQ(read_file(fs::path(a) / "teacher_curve.csv").substr(0, 62),
            "step,episodes,mean_return,success_rate,policy_loss,value_loss,");
}

TEST_F(CliTest, MissingConfigExitsFour) {
  EXPECT_EQ(run({"train-teacher", "--config", (dir_ / "nope.json").string()}).code, kExitIo);
}

TEST_F(CliTest, BadConfigExitsTwoAndNamesField) {
  write_file(config_, R"({"env": {"kind": "Crossing"}, "a2c": {"gama": 0.9}})");
  const CliResult r = run({"train-teacher", "--config", config_});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("a2c.gama"), std::string::npos);
}

TEST_F(CliTest, HorizonOneHasNothingToDistill) {
  const CliResult r = run({"train-phr", "--config", config_, "--teacher", teacher_checkpoint(), "-n", "1"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("nothing to distill"), std::string::npos);
}

TEST_F(CliTest, TrainPhrWritesStudent) {
  const std::string out = (dir_ / "phr").string();
  const CliResult r =
      run({"train-phr", "--config", config_, "--teacher", teacher_checkpoint(), "--measure", "l2", "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Checkpoint student = load_checkpoint(fs::path(out) / "phr_n4_l2.ckpt");
  EXPECT_EQ(student.stage, Stage::PhrStudent);
  EXPECT_EQ(student.training.measure, Measure::SquaredDistance);
  EXPECT_TRUE(fs::exists(fs::path(out) / "phr_n4_l2_curve.csv"));
}

TEST_F(CliTest, WeakTeacherExitsThree) {
  const CliResult r = run({"train-phr", "--config", config_, "--teacher", teacher_checkpoint(true), "--out",
                           (dir_ / "phr").string()});
  EXPECT_EQ(r.code, kExitTraining) << r.err;
}

TEST_F(CliTest, MismatchedNetworkExitsTwo) {
  write_file(config_, R"({"env": {"kind": "Crossing", "seed": 1}, "net": {"hidden_layers": [8], "head_width": 16, "n_heads": 4}})");
  EXPECT_EQ(run({"train-phr", "--config", config_, "--teacher", teacher_checkpoint()}).code, kExitUsage);
}

TEST_F(CliTest, CorruptCheckpointExitsFour) {
  const std::string path = teacher_checkpoint();
  std::string bytes = read_file(path);
  bytes.back() = static_cast<char>(bytes.back() ^ 0x40);
  write_file(path, bytes);
  EXPECT_EQ(run({"eval", "--checkpoint", path, "--episodes", "1"}).code, kExitIo);
}

TEST_F(CliTest, BenchToUnwritableDirectoryExitsFour) {
  const std::string ckpt = teacher_checkpoint();
  write_file(dir_ / "plain_file", "x");
  const CliResult r = run({"bench", "--checkpoint", "1=" + ckpt, "--steps", "10", "--runs", "1", "--out",
                           (dir_ / "plain_file" / "sub").string()});
  EXPECT_EQ(r.code, kExitIo);
}

TEST_F(CliTest, BenchWritesOutputs) {
  const std::string ckpt = teacher_checkpoint();
  const std::string out = (dir_ / "bench").string();
  const CliResult r = run({"bench", "--checkpoint", "1=" + ckpt, "--checkpoint", "4=" + ckpt, "--horizons", "1,4",
                           "--steps", "200", "--warmup", "0", "--runs", "2", "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string csv = read_file(fs::path(out) / "bench_raw.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(fs::path(out) / "bench_Crossing.dat"));
  EXPECT_EQ(run({"bench", "--checkpoint", "1=" + ckpt, "--horizons", "1,8", "--out", out}).code, kExitUsage);
}

TEST_F(CliTest, RenderPathIsDeterministicAndRejectsMiniPong) {
  const std::string ckpt = teacher_checkpoint();
  const CliResult a = run({"render-path", "--checkpoint", ckpt, "-n", "4", "--seed", "2"});
  const CliResult b = run({"render-path", "--checkpoint", ckpt, "-n", "4", "--seed", "2"});
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("[1]"), std::string::npos);

  Checkpoint pong;
  pong.env = EnvConfig::defaults(EnvKind::MiniPong);
  NetSpec spec;
  spec.input_dim = observation_size(pong.env);
  spec.hidden_layers = {4};
  spec.head_width = 4;
  spec.n_actions = 3;
  pong.params = ModelParams::initialize(spec, 1);
  save_checkpoint(dir_ / "pong.ckpt", pong);
  EXPECT_EQ(run({"render-path", "--checkpoint", (dir_ / "pong.ckpt").string()}).code, kExitUsage);
}

TEST_F(CliTest, EvalReportsSuccessRate) {
  const CliResult r = run({"eval", "--checkpoint", teacher_checkpoint(), "--episodes", "3"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("success_rate="), std::string::npos);
}

TEST_F(CliTest, GradcheckPassesAndCatchesCorruption) {
  EXPECT_EQ(run({"gradcheck", "--nets", "2"}).code, kExitOk);
  set_backward_corruption_for_testing(1e-3);
  const int code = run({"gradcheck", "--nets", "2"}).code;
  set_backward_corruption_for_testing(0.0);
  EXPECT_EQ(code, kExitTraining);
}
