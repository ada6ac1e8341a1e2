#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "phrlab/a2c.h"
#include "phrlab/agent.h"
#include "phrlab/bench.h"
#include "phrlab/checkpoint.h"
#include "phrlab/cli.h"
#include "phrlab/error.h"
#include "phrlab/losscheck.h"
#include "phrlab/phr.h"
#include "phrlab/render.h"

namespace py = pybind11;
using namespace phrlab;

namespace {

py::tuple run_cli_captured(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Policy horizon regression: environments, A2C teacher, PHR student and inference benchmark";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  py::enum_<EnvKind>(m, "EnvKind")
      .value("FourRooms", EnvKind::FourRooms)
      .value("Crossing", EnvKind::Crossing)
      .value("MiniPong", EnvKind::MiniPong);

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_static("defaults", &EnvConfig::defaults, py::arg("kind"), py::arg("seed") = 0)
      .def_readwrite("kind", &EnvConfig::kind)
      .def_readwrite("width", &EnvConfig::width)
      .def_readwrite("height", &EnvConfig::height)
      .def_readwrite("max_steps", &EnvConfig::max_steps)
      .def_readwrite("seed", &EnvConfig::seed)
      .def("validate", &EnvConfig::validate);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("observation", &StepResult::observation)
      .def_readonly("reward", &StepResult::reward)
      .def_readonly("done", &StepResult::done);

  py::class_<Environment>(m, "Environment")
      .def(py::init<EnvConfig>())
      .def("reset", &Environment::reset, py::arg("episode_seed"))
      .def("step", &Environment::step, py::arg("action"))
      .def("render", &Environment::render)
      .def_property_readonly("num_actions", &Environment::num_actions)
      .def_property_readonly("observation_size", &Environment::observation_size)
      .def_property_readonly("done", &Environment::done);

  py::class_<NetSpec>(m, "NetSpec")
      .def(py::init<>())
      .def_readwrite("input_dim", &NetSpec::input_dim)
      .def_readwrite("hidden_layers", &NetSpec::hidden_layers)
      .def_readwrite("head_width", &NetSpec::head_width)
      .def_readwrite("n_heads", &NetSpec::n_heads)
      .def_readwrite("n_actions", &NetSpec::n_actions)
      .def("parameter_count", &NetSpec::parameter_count);

  py::class_<ModelParams>(m, "ModelParams")
      .def_static("initialize", &ModelParams::initialize, py::arg("spec"), py::arg("seed"))
      .def_property_readonly("spec", &ModelParams::spec)
      .def("flatten", &ModelParams::flatten)
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def(
      "forward",
      [](const ModelParams& params, const Observation& obs, std::optional<std::size_t> heads) {
        const PolicyVectorOutput out = forward(params, obs, heads);
        return py::make_tuple(out.distributions, out.value);
      },
      py::arg("params"), py::arg("observation"), py::arg("heads") = py::none(),
      "Policy vector (one distribution per head) and value for one observation.");

  py::class_<A2CConfig>(m, "A2CConfig")
      .def(py::init<>())
      .def_readwrite("workers", &A2CConfig::workers)
      .def_readwrite("rollout_len", &A2CConfig::rollout_len)
      .def_readwrite("gamma", &A2CConfig::gamma)
      .def_readwrite("entropy_coef", &A2CConfig::entropy_coef)
      .def_readwrite("total_steps", &A2CConfig::total_steps)
      .def_readwrite("lr", &A2CConfig::lr)
      .def_readwrite("seed", &A2CConfig::seed)
      .def_readwrite("eval_interval", &A2CConfig::eval_interval)
      .def_readwrite("eval_episodes", &A2CConfig::eval_episodes)
      .def_readwrite("center_probe_steps", &A2CConfig::center_probe_steps);

  m.def(
      "train_teacher",
      [](const EnvConfig& env, const ModelParams& initial, const A2CConfig& config) {
        py::gil_scoped_release release;
        return train_teacher(env, initial, config).params;
      },
      py::arg("env"), py::arg("initial"), py::arg("config"));

  py::enum_<Measure>(m, "Measure")
      .value("SquaredDistance", Measure::SquaredDistance)
      .value("KLDivergence", Measure::KLDivergence)
      .value("CrossEntropy", Measure::CrossEntropy);

  py::class_<PhrConfig>(m, "PhrConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &PhrConfig::horizon)
      .def_readwrite("stride", &PhrConfig::stride)
      .def_readwrite("lambda_", &PhrConfig::lambda)
      .def_readwrite("measure", &PhrConfig::measure)
      .def_readwrite("episodes", &PhrConfig::episodes)
      .def_readwrite("trunk_frozen", &PhrConfig::trunk_frozen)
      .def_readwrite("lr", &PhrConfig::lr)
      .def_readwrite("seed", &PhrConfig::seed)
      .def_readwrite("validation_episodes", &PhrConfig::validation_episodes)
      .def_readwrite("validation_interval", &PhrConfig::validation_interval);

  m.def(
      "train_phr",
      [](const ModelParams& teacher, const EnvConfig& env, const PhrConfig& config) {
        PhrResult r;
        {
          py::gil_scoped_release release;
          r = train_phr(teacher, env, config);
        }
        return py::make_tuple(r.params, r.final_agreement);
      },
      py::arg("teacher"), py::arg("env"), py::arg("config"),
      "Distills heads 2..n; returns (student params, per-head agreement).");

  m.def(
      "measure_loss",
      [](const std::vector<double>& student, const std::vector<double>& target, Measure measure) {
        return measure_loss(student, target, measure);
      },
      py::arg("student"), py::arg("target"), py::arg("measure"));
  m.def(
      "subsequence_anchors",
      [](std::size_t m_steps, std::size_t horizon, std::size_t stride) {
        auto traj = std::make_shared<Trajectory>();
        traj->steps.resize(m_steps);
        std::vector<std::size_t> anchors;
        for (const auto& s : extract_subsequences(traj, horizon, stride)) anchors.push_back(s.t());
        return anchors;
      },
      py::arg("length"), py::arg("horizon"), py::arg("stride") = 1,
      "1-based anchors t of the sub-sequences extracted from a trajectory of the given length.");

  m.def(
      "gradient_check",
      [](std::uint64_t seed) {
        double worst = 0.0;
        bool passed = true;
        for (const LossCheck& c : check_training_losses(random_check_spec(seed), seed)) {
          worst = std::max(worst, c.report.max_relative_error);
          passed = passed && c.report.passed;
        }
        return py::make_tuple(passed, worst);
      },
      py::arg("seed") = 0, "Finite-difference check of every training loss on one random net.");

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("episodes", &EvalResult::episodes)
      .def_readonly("success_rate", &EvalResult::success_rate)
      .def_readonly("mean_return", &EvalResult::mean_return)
      .def_readonly("mean_length", &EvalResult::mean_length);
  m.def("evaluate_policy", &evaluate_policy, py::arg("params"), py::arg("env"), py::arg("episodes"),
        py::arg("horizon") = 1, py::arg("seed") = 0);

  py::class_<BenchReport>(m, "BenchReport")
      .def_readonly("horizon", &BenchReport::horizon)
      .def_readonly("steps", &BenchReport::steps)
      .def_readonly("evaluations", &BenchReport::evaluations)
      .def_readonly("episodes", &BenchReport::episodes)
      .def_readonly("total_reward", &BenchReport::total_reward)
      .def_readonly("wall_clock", &BenchReport::wall_clock)
      .def_readonly("score_per_second", &BenchReport::score_per_second);
  m.def(
      "run_benchmark",
      [](const ModelParams& params, const EnvConfig& env, std::size_t horizon, std::uint64_t seed, std::size_t steps,
         std::size_t warmup) {
        py::gil_scoped_release release;
        return run_benchmark(params, env, horizon, seed, BenchOptions{steps, warmup});
      },
      py::arg("params"), py::arg("env"), py::arg("horizon"), py::arg("seed") = 0, py::arg("steps") = 100000,
      py::arg("warmup") = 1000);
  m.def("evaluation_count_ok", &evaluation_count_ok, py::arg("report"));

  m.def(
      "render_path",
      [](const ModelParams& params, const EnvConfig& env, std::size_t horizon, std::uint64_t seed) {
        const PathRender r = render_path(params, env, horizon, seed);
        return py::make_tuple(r.text, r.evaluation_indices(), r.reached_goal);
      },
      py::arg("params"), py::arg("env"), py::arg("horizon"), py::arg("seed") = 0);

  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& path, const ModelParams& params, const EnvConfig& env) {
        Checkpoint c;
        c.env = env;
        c.params = params;
        save_checkpoint(path, c);
      },
      py::arg("path"), py::arg("params"), py::arg("env"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        Checkpoint c = load_checkpoint(path);
        return py::make_tuple(c.params, c.env);
      },
      py::arg("path"));

  m.def("run_cli", &run_cli_captured, py::arg("args"), "Runs a phrlab command; returns (exit code, stdout, stderr).");
}
