#include "phrlab/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "phrlab/agent.h"
#include "phrlab/error.h"
#include "phrlab/seeding.h"

namespace phrlab {
namespace {

constexpr std::uint64_t kBenchStream = 0x62656e63;

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

BenchReport run_benchmark(const ModelParams& params, const EnvConfig& env_config, std::size_t horizon,
                          std::uint64_t seed, const BenchOptions& options) {
  MultiStepAgent agent(params, horizon);
  BenchReport report;
  report.env = env_config.kind;
  report.horizon = horizon;
  report.seed = seed;

  {
    Environment warm(env_config);
    MultiStepAgent warm_agent(params, horizon);
    EpisodeSeeder warm_seeds(derive_seed(env_config.seed, {seed, 1}), kBenchStream);
    Observation obs = warm.reset(warm_seeds.next());
    bool fresh = true;
    for (std::size_t i = 0; i < options.warmup_steps; ++i) {
      StepResult step = warm.step(warm_agent.act(obs, fresh));
      fresh = step.done;
      obs = step.done ? warm.reset(warm_seeds.next()) : std::move(step.observation);
    }
  }

  Environment env(env_config);
  EpisodeSeeder seeds(derive_seed(env_config.seed, {seed}), kBenchStream);
  Observation obs = env.reset(seeds.next());
  bool fresh = true;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < options.total_steps; ++i) {
    StepResult step = env.step(agent.act(obs, fresh));
    report.total_reward += step.reward;
    fresh = step.done;
    if (step.done) {
      ++report.episodes;
      obs = env.reset(seeds.next());
    } else {
      obs = std::move(step.observation);
    }
  }
  report.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.steps = options.total_steps;
  report.evaluations = agent.evaluations();
  report.model_seconds = agent.model_seconds();
  report.score_per_second = report.wall_clock > 0.0 ? report.total_reward / report.wall_clock : 0.0;
  return report;
}

bool evaluation_count_ok(const BenchReport& report) {
  const std::size_t lower = (report.steps + report.horizon - 1) / report.horizon;
  return report.evaluations >= lower && report.evaluations <= lower + report.episodes;
}

std::vector<BenchReport> run_suite(const std::map<EnvKind, CheckpointSet>& checkpoints,
                                   const std::vector<EnvConfig>& envs, const std::vector<std::size_t>& horizons,
                                   std::size_t runs, std::uint64_t seed, const BenchOptions& options) {
  for (const EnvConfig& env : envs) {
    const auto it = checkpoints.find(env.kind);
    for (std::size_t n : horizons) {
      if (it == checkpoints.end() || !it->second.contains(n)) {
        throw ConfigError("no checkpoint for " + std::string(to_string(env.kind)) + " horizon " + std::to_string(n));
      }
    }
  }
  std::vector<BenchReport> reports;
  for (const EnvConfig& env : envs) {
    const CheckpointSet& set = checkpoints.at(env.kind);
    for (std::size_t n : horizons) {
      for (std::size_t r = 0; r < runs; ++r) {
        EnvConfig run_env = env;
        run_env.seed = derive_seed(env.seed, {r});
        BenchReport report = run_benchmark(set.at(n), run_env, n, derive_seed(seed, {r}), options);
        report.seed = r;
        reports.push_back(report);
      }
    }
  }
  return reports;
}

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<BenchAggregate> aggregate(const std::vector<BenchReport>& reports) {
  std::vector<std::pair<EnvKind, std::size_t>> keys;
  for (const auto& r : reports) {
    const std::pair key{r.env, r.horizon};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<BenchAggregate> rows;
  for (const auto& [env, n] : keys) {
    std::vector<double> wall, sps, reward, evals, episodes;
    for (const auto& r : reports) {
      if (r.env != env || r.horizon != n) continue;
      wall.push_back(r.wall_clock);
      sps.push_back(r.score_per_second);
      reward.push_back(r.total_reward);
      evals.push_back(static_cast<double>(r.evaluations));
      episodes.push_back(static_cast<double>(r.episodes));
    }
    rows.push_back({env, n, wall.size(), mean_std(wall), mean_std(sps), mean_std(reward), mean_std(evals),
                    mean_std(episodes)});
  }
  return rows;
}

std::string raw_csv(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << "env,n,seed,steps,evaluations,episodes,total_reward,wall_clock_s,score_per_s\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    out << to_string(r.env) << ',' << r.horizon << ',' << r.seed << ',' << r.steps << ',' << r.evaluations << ','
        << r.episodes << ',' << r.total_reward << ',' << r.wall_clock << ',' << r.score_per_second << '\n';
  }
  return out.str();
}

std::string aggregate_json(const std::vector<BenchAggregate>& rows) {
  auto stat = [](const Stat& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : rows) {
    out.push_back({{"env", std::string(to_string(row.env))},
                   {"n", row.horizon},
                   {"runs", row.runs},
                   {"wall_clock_s", stat(row.wall_clock)},
                   {"score_per_s", stat(row.score_per_second)},
                   {"total_reward", stat(row.total_reward)},
                   {"evaluations", stat(row.evaluations)},
                   {"episodes", stat(row.episodes)}});
  }
  return out.dump(2) + "\n";
}

std::string gnuplot_data(const std::vector<BenchAggregate>& rows, EnvKind env) {
  std::ostringstream out;
  out << "# n wall_clock_mean wall_clock_std score_per_s_mean score_per_s_std\n";
  for (const auto& row : rows) {
    if (row.env != env) continue;
    out << row.horizon << ' ' << row.wall_clock.mean << ' ' << row.wall_clock.std << ' ' << row.score_per_second.mean
        << ' ' << row.score_per_second.std << '\n';
  }
  return out.str();
}

void write_bench_outputs(const std::filesystem::path& dir, const std::vector<BenchReport>& reports) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto rows = aggregate(reports);
  write_file(dir / "bench_raw.csv", raw_csv(reports));
  write_file(dir / "bench_aggregate.json", aggregate_json(rows));
  std::vector<EnvKind> seen;
  for (const auto& row : rows) {
    if (std::find(seen.begin(), seen.end(), row.env) != seen.end()) continue;
    seen.push_back(row.env);
    write_file(dir / ("bench_" + std::string(to_string(row.env)) + ".dat"), gnuplot_data(rows, row.env));
  }
}

}  // namespace phrlab
