#include "phrlab/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "phrlab/a2c.h"
#include "phrlab/agent.h"
#include "phrlab/bench.h"
#include "phrlab/checkpoint.h"
#include "phrlab/config.h"
#include "phrlab/error.h"
#include "phrlab/losscheck.h"
#include "phrlab/phr.h"
#include "phrlab/render.h"

namespace phrlab {
namespace {

namespace fs = std::filesystem;

bool verbose() {
  const char* v = std::getenv("PHRLAB_VERBOSE");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

std::string teacher_curve_csv(const std::vector<TeacherCurveRow>& curve) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "step,episodes,mean_return,success_rate,policy_loss,value_loss,entropy\n";
  for (const auto& r : curve) {
    out << r.step << ',' << r.episodes << ',' << r.mean_return << ',' << r.success_rate << ',' << r.policy_loss << ','
        << r.value_loss << ',' << r.entropy << '\n';
  }
  return out.str();
}

std::string phr_curve_csv(const std::vector<PhrCurveRow>& curve, std::size_t horizon) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "update,loss";
  for (std::size_t h = 2; h <= horizon; ++h) out << ",agreement_head" << h;
  out << '\n';
  for (const auto& r : curve) {
    out << r.update << ',' << r.loss;
    for (double a : r.agreement) out << ',' << a;
    out << '\n';
  }
  return out.str();
}

struct TeacherArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::string> out_dir;
};

struct PhrArgs {
  std::string config;
  std::string teacher;
  std::optional<std::string> measure;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> stride;
  std::optional<double> lambda;
  std::optional<std::size_t> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool train_trunk = false;
};

struct BenchArgs {
  std::vector<std::string> checkpoints;
  std::optional<std::string> env;
  std::vector<std::size_t> horizons;
  std::size_t runs = 5;
  std::size_t steps = 100000;
  std::size_t warmup = 1000;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct RenderArgs {
  std::string checkpoint;
  std::optional<std::string> env;
  std::size_t horizon = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> out_file;
};

struct EvalArgs {
  std::string checkpoint;
  std::optional<std::string> env;
  std::size_t horizon = 1;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
};

struct GradcheckArgs {
  std::size_t nets = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

EnvConfig env_for(const Checkpoint& ckpt, const std::optional<std::string>& kind) {
  if (!kind) return ckpt.env;
  const EnvKind k = parse_env_kind(*kind);
  return k == ckpt.env.kind ? ckpt.env : EnvConfig::defaults(k, ckpt.env.seed);
}

void check_env_matches(const NetSpec& spec, const EnvConfig& env) {
  if (spec.input_dim != observation_size(env) || spec.n_actions != static_cast<std::size_t>(num_actions(env.kind))) {
    throw ConfigError("checkpoint network (input " + std::to_string(spec.input_dim) + ", actions " +
                      std::to_string(spec.n_actions) + ") does not fit env " + std::string(to_string(env.kind)));
  }
}

int train_teacher_cmd(const TeacherArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = load_run_config(a.config);
  if (a.seed) config.apply_seed(*a.seed);
  if (a.steps) config.a2c.total_steps = *a.steps;
  if (a.out_dir) config.output_dir = *a.out_dir;
  config.validate();
  const fs::path dir = config.output_dir;
  write_effective_config(dir, config);

  const NetSpec spec = config.net_spec();
  const TeacherResult result =
      train_teacher(config.env, ModelParams::initialize(spec, derive_seed(config.a2c.seed, {0x696e6974})), config.a2c);
  if (verbose()) {
    for (const auto& r : result.curve) {
      err << "step " << r.step << " return " << r.mean_return << " greedy success " << r.success_rate << '\n';
    }
  }
  Checkpoint ckpt;
  ckpt.stage = Stage::Teacher;
  ckpt.seed = config.a2c.seed;
  ckpt.env = config.env;
  ckpt.training.env_steps = result.env_steps;
  ckpt.params = result.params;
  save_checkpoint(dir / "teacher.ckpt", ckpt);
  write_file(dir / "teacher_curve.csv", teacher_curve_csv(result.curve));
  const EvalResult eval = evaluate_policy(result.params, config.env, config.a2c.eval_episodes * 10, 1,
                                          derive_seed(config.seed, {0x66696e}));
  out << "teacher: " << result.env_steps << " steps, " << result.episodes << " episodes, greedy success "
      << eval.success_rate << ", mean return " << eval.mean_return << "\n";
  out << "wrote " << (dir / "teacher.ckpt").string() << '\n';
  return kExitOk;
}

int train_phr_cmd(const PhrArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = load_run_config(a.config);
  if (a.seed) config.apply_seed(*a.seed);
  if (a.measure) {
    config.phr.measure = parse_measure(*a.measure);
    config.phr.lambda = default_lambda(config.phr.measure);
  }
  if (a.lambda) config.phr.lambda = *a.lambda;
  if (a.horizon) config.phr.horizon = *a.horizon;
  if (a.stride) config.phr.stride = *a.stride;
  if (a.episodes) config.phr.episodes = *a.episodes;
  if (a.train_trunk) config.phr.trunk_frozen = false;
  if (a.out_dir) config.output_dir = *a.out_dir;
  config.validate();
  config.phr.validate();

  const Checkpoint teacher = load_checkpoint(a.teacher);
  if (!(teacher.params.spec() == config.net_spec())) {
    throw ConfigError("teacher checkpoint network does not match the config's net section (NetSpec mismatch)");
  }
  if (teacher.env.kind != config.env.kind) {
    throw ConfigError("teacher was trained on " + std::string(to_string(teacher.env.kind)) + ", config env is " +
                      std::string(to_string(config.env.kind)));
  }
  const fs::path dir = config.output_dir;
  write_effective_config(dir, config);
  const PhrResult result = train_phr(teacher.params, config.env, config.phr, config.a2c);
  if (verbose()) {
    for (const auto& r : result.curve) {
      err << "update " << r.update << " loss " << r.loss << " agreement";
      for (double x : r.agreement) err << ' ' << x;
      err << '\n';
    }
  }
  Checkpoint ckpt;
  ckpt.stage = Stage::PhrStudent;
  ckpt.seed = config.phr.seed;
  ckpt.env = config.env;
  ckpt.training.env_steps = teacher.training.env_steps;
  ckpt.training.updates = result.updates;
  ckpt.training.measure = config.phr.measure;
  ckpt.training.lambda = config.phr.lambda;
  ckpt.training.stride = config.phr.stride;
  ckpt.training.horizon = config.phr.horizon;
  ckpt.params = result.params;
  const std::string stem = "phr_n" + std::to_string(config.phr.horizon) + "_" + std::string(to_string(config.phr.measure));
  save_checkpoint(dir / (stem + ".ckpt"), ckpt);
  write_file(dir / (stem + "_curve.csv"), phr_curve_csv(result.curve, config.phr.horizon));
  out << "phr: " << result.updates << " updates over " << result.kept_episodes << " episodes, agreement";
  for (double x : result.final_agreement) out << ' ' << x;
  out << "\nwrote " << (dir / (stem + ".ckpt")).string() << '\n';
  return kExitOk;
}

int bench_cmd(const BenchArgs& a, std::ostream& out) {
  std::map<std::size_t, Checkpoint> by_horizon;
  for (const std::string& spec : a.checkpoints) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("--checkpoint expects n=path, got '" + spec + "'");
    std::size_t n = 0;
    try {
      n = std::stoul(spec.substr(0, eq));
    } catch (const std::exception&) {
      throw ConfigError("--checkpoint horizon is not a number in '" + spec + "'");
    }
    by_horizon[n] = load_checkpoint(spec.substr(eq + 1));
  }
  std::vector<std::size_t> horizons = a.horizons;
  if (horizons.empty()) {
    for (const auto& [n, ckpt] : by_horizon) horizons.push_back(n);
  }
  if (horizons.empty()) throw ConfigError("bench needs at least one --checkpoint n=path");
  for (std::size_t n : horizons) {
    if (!by_horizon.contains(n)) throw ConfigError("no checkpoint given for horizon " + std::to_string(n));
  }
  const EnvConfig env = env_for(by_horizon.begin()->second, a.env);
  CheckpointSet set;
  for (const auto& [n, ckpt] : by_horizon) {
    check_env_matches(ckpt.params.spec(), env);
    set.emplace(n, ckpt.params);
  }
  // Fail on an unwritable destination before spending time on the runs.
  const fs::path dir = a.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  write_file(dir / "bench_raw.csv", "");

  BenchOptions options;
  options.total_steps = a.steps;
  options.warmup_steps = a.warmup;
  const std::vector<BenchReport> reports = run_suite({{env.kind, set}}, {env}, horizons, a.runs, a.seed, options);
  write_bench_outputs(dir, reports);
  for (const auto& row : aggregate(reports)) {
    out << to_string(row.env) << " n=" << row.horizon << " wall_clock=" << row.wall_clock.mean
        << "s score_per_s=" << row.score_per_second.mean << " evaluations=" << row.evaluations.mean << '\n';
  }
  return kExitOk;
}

int render_cmd(const RenderArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const EnvConfig env = env_for(ckpt, a.env);
  if (env.kind == EnvKind::MiniPong) throw ConfigError("render-path needs a grid environment; MiniPong has no spatial path");
  check_env_matches(ckpt.params.spec(), env);
  const PathRender render = render_path(ckpt.params, env, a.horizon, a.seed);
  if (a.out_file) {
    write_file(*a.out_file, render.text);
  } else {
    out << render.text;
  }
  return kExitOk;
}

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const EnvConfig env = env_for(ckpt, a.env);
  check_env_matches(ckpt.params.spec(), env);
  const EvalResult r = evaluate_policy(ckpt.params, env, a.episodes, a.horizon, a.seed);
  out << to_string(env.kind) << " n=" << a.horizon << " episodes=" << r.episodes << " success_rate=" << r.success_rate
      << " mean_return=" << r.mean_return << " mean_length=" << r.mean_length << '\n';
  return kExitOk;
}

int gradcheck_cmd(const GradcheckArgs& a, std::ostream& out) {
  GradientCheckOptions options;
  options.tolerance = a.tolerance;
  double worst = 0.0;
  for (std::size_t k = 0; k < a.nets; ++k) {
    const NetSpec spec = random_check_spec(derive_seed(a.seed, {k}));
    for (const LossCheck& check : check_training_losses(spec, derive_seed(a.seed, {k, 1}), options)) {
      worst = std::max(worst, check.report.max_relative_error);
      out << "net " << k << " heads=" << spec.n_heads << " params=" << spec.parameter_count() << ' ' << check.loss
          << " max_rel_err=" << check.report.max_relative_error << (check.report.passed ? " ok" : " FAIL") << '\n';
    }
  }
  const bool passed = worst < a.tolerance;
  out << "worst relative error " << worst << (passed ? " < " : " >= ") << a.tolerance << '\n';
  return passed ? kExitOk : kExitTraining;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Policy horizon regression lab"};
  app.require_subcommand(1);

  TeacherArgs teacher;
  auto* t = app.add_subcommand("train-teacher", "Train the A2C teacher policy (head 1)");
  t->add_option("--config", teacher.config, "Run config (JSON)")->required();
  t->add_option("--seed", teacher.seed, "Override every seed in the config");
  t->add_option("--steps", teacher.steps, "Override a2c.total_steps");
  t->add_option("--out", teacher.out_dir, "Override output_dir");

  PhrArgs phr;
  auto* p = app.add_subcommand("train-phr", "Distill heads 2..n from a teacher checkpoint");
  p->add_option("--config", phr.config, "Run config (JSON)")->required();
  p->add_option("--teacher", phr.teacher, "Teacher checkpoint")->required();
  p->add_option("--measure", phr.measure, "l2, kl or ce");
  p->add_option("--horizon,-n", phr.horizon, "Policy horizon n");
  p->add_option("--stride", phr.stride, "Sub-sequence stride");
  p->add_option("--lambda", phr.lambda, "Loss weight");
  p->add_option("--episodes", phr.episodes, "Teacher episodes K");
  p->add_option("--seed", phr.seed, "Override every seed in the config");
  p->add_option("--out", phr.out_dir, "Override output_dir");
  p->add_flag("--train-trunk", phr.train_trunk, "Let the PHR loss update the shared trunk");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Inference benchmark over horizons and runs");
  b->add_option("--checkpoint", bench.checkpoints, "n=path, repeatable")->required();
  b->add_option("--env", bench.env, "Environment kind (defaults to the checkpoint's)");
  b->add_option("--horizons", bench.horizons, "Horizons to run")->delimiter(',');
  b->add_option("--runs", bench.runs, "Runs per horizon");
  b->add_option("--steps", bench.steps, "Timed steps per run");
  b->add_option("--warmup", bench.warmup, "Untimed warm-up steps");
  b->add_option("--seed", bench.seed, "Base seed");
  b->add_option("--out", bench.out_dir, "Output directory")->required();

  RenderArgs render;
  auto* r = app.add_subcommand("render-path", "Draw the greedy multi-step path on a grid");
  r->add_option("--checkpoint", render.checkpoint, "Checkpoint")->required();
  r->add_option("--env", render.env, "Environment kind (defaults to the checkpoint's)");
  r->add_option("--horizon,-n", render.horizon, "Actions per evaluation");
  r->add_option("--seed", render.seed, "Episode seed");
  r->add_option("--out", render.out_file, "Write the rendering to a file");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Greedy success rate and mean score of a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint")->required();
  e->add_option("--env", eval.env, "Environment kind (defaults to the checkpoint's)");
  e->add_option("--horizon,-n", eval.horizon, "Actions per evaluation");
  e->add_option("--episodes", eval.episodes, "Episodes");
  e->add_option("--seed", eval.seed, "Seed");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the training losses");
  g->add_option("--nets", grad.nets, "Random nets to check");
  g->add_option("--seed", grad.seed, "Seed");
  g->add_option("--tolerance", grad.tolerance, "Maximum relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }

  try {
    if (t->parsed()) return train_teacher_cmd(teacher, out, err);
    if (p->parsed()) return train_phr_cmd(phr, out, err);
    if (b->parsed()) return bench_cmd(bench, out);
    if (r->parsed()) return render_cmd(render, out);
    if (e->parsed()) return eval_cmd(eval, out);
    if (g->parsed()) return gradcheck_cmd(grad, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const TrainingError& ex) {
    err << "training failed: " << ex.what() << '\n';
    return kExitTraining;
  } catch (const IoError& ex) {
    err << "i/o error: " << ex.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace phrlab
