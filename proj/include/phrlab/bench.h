#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "phrlab/envs.h"
#include "phrlab/nn.h"

namespace phrlab {

struct BenchReport {
  EnvKind env = EnvKind::FourRooms;
  std::size_t horizon = 1;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t evaluations = 0;
  std::size_t episodes = 0;
  double total_reward = 0.0;
  double wall_clock = 0.0;  // seconds, act/step loop only
  double model_seconds = 0.0;
  double score_per_second = 0.0;
};

struct BenchOptions {
  std::size_t total_steps = 100000;
  std::size_t warmup_steps = 1000;
};

/// Steps the environment exactly total_steps times with a greedy multi-step
/// agent, auto-resetting on done. Warm-up runs on a separate environment
/// instance so the measured action sequence depends only on (params, env, n, seed).
BenchReport run_benchmark(const ModelParams& params, const EnvConfig& env_config, std::size_t horizon,
                          std::uint64_t seed, const BenchOptions& options = {});

/// ceil(steps/n) <= evaluations <= ceil(steps/n) + episodes.
bool evaluation_count_ok(const BenchReport& report);

/// Horizon -> checkpoint parameters.
using CheckpointSet = std::map<std::size_t, ModelParams>;

/// envs x horizons x runs. Run r uses env seed derive_seed(env.seed, {r}), so
/// Crossing layouts differ between runs. Throws ConfigError when a horizon has no checkpoint.
std::vector<BenchReport> run_suite(const std::map<EnvKind, CheckpointSet>& checkpoints,
                                   const std::vector<EnvConfig>& envs, const std::vector<std::size_t>& horizons,
                                   std::size_t runs, std::uint64_t seed, const BenchOptions& options = {});

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

Stat mean_std(const std::vector<double>& values);

struct BenchAggregate {
  EnvKind env = EnvKind::FourRooms;
  std::size_t horizon = 1;
  std::size_t runs = 0;
  Stat wall_clock;
  Stat score_per_second;
  Stat total_reward;
  Stat evaluations;
  Stat episodes;
};

/// One row per (env, n), in first-seen order.
std::vector<BenchAggregate> aggregate(const std::vector<BenchReport>& reports);

std::string raw_csv(const std::vector<BenchReport>& reports);
std::string aggregate_json(const std::vector<BenchAggregate>& rows);
/// Columns: n, mean wall-clock, std, mean score/s, std. One file per env.
std::string gnuplot_data(const std::vector<BenchAggregate>& rows, EnvKind env);

/// Writes bench_raw.csv, bench_aggregate.json and one bench_<env>.dat per env.
/// Throws IoError when the directory cannot be written.
void write_bench_outputs(const std::filesystem::path& dir, const std::vector<BenchReport>& reports);

}  // namespace phrlab
