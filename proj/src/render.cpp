#include "phrlab/render.h"

#include <iomanip>
#include <map>
#include <sstream>

#include "phrlab/agent.h"
#include "phrlab/error.h"
#include "phrlab/seeding.h"

namespace phrlab {
namespace {

const char* action_name(ActionId a) {
  switch (a) {
    case kTurnLeft: return "left";
    case kTurnRight: return "right";
    case kForward: return "forward";
  }
  return "?";
}

std::string cell_label(const PathStep& step) {
  const std::string n = std::to_string(step.index);
  return step.evaluated ? "[" + n + "]" : " " + n + " ";
}

}  // namespace

std::vector<std::size_t> PathRender::evaluation_indices() const {
  std::vector<std::size_t> out;
  for (const auto& s : steps) {
    if (s.evaluated) out.push_back(s.index);
  }
  return out;
}

PathRender render_path(const ModelParams& params, const EnvConfig& env_config, std::size_t horizon,
                       std::uint64_t seed) {
  if (env_config.kind == EnvKind::MiniPong) throw UsageError("render-path needs a grid environment; MiniPong has no spatial path");
  Environment env(env_config);
  MultiStepAgent agent(params, horizon);
  EpisodeSeeder seeds(derive_seed(env_config.seed, {seed}), 0x72656e64);
  Observation obs = env.reset(seeds.next());
  const GridState start = env.grid_state();

  PathRender out;
  bool fresh = true;
  double last_reward = 0.0;
  while (!env.done()) {
    const GridState& s = env.grid_state();
    PathStep step;
    step.index = out.steps.size() + 1;
    step.cell = s.agent;
    step.dir = s.dir;
    step.action = agent.act(obs, fresh);
    step.evaluated = agent.last_action_evaluated();
    fresh = false;
    StepResult r = env.step(step.action);
    last_reward = r.reward;
    obs = std::move(r.observation);
    out.steps.push_back(step);
  }
  out.reached_goal = last_reward > 0.0;

  std::map<std::pair<int, int>, const PathStep*> first;
  for (const auto& step : out.steps) first.emplace(std::pair{step.cell.row, step.cell.col}, &step);
  const int width = 5;
  std::ostringstream text;
  text << to_string(env_config.kind) << " n=" << horizon << " seed=" << seed << " actions=" << out.steps.size()
       << " evaluations=" << agent.evaluations() << (out.reached_goal ? " goal reached" : " goal not reached") << '\n';
  for (int row = 0; row < start.height; ++row) {
    for (int col = 0; col < start.width; ++col) {
      std::string label;
      if (start.wall(row, col)) {
        label = "#";
      } else if (auto it = first.find({row, col}); it != first.end()) {
        label = cell_label(*it->second);
      } else if (Cell{row, col} == start.goal) {
        label = "G";
      } else {
        label = ".";
      }
      text << std::setw(width) << label;
    }
    text << '\n';
  }
  text << "steps (bracketed = model evaluation):\n";
  for (const auto& step : out.steps) {
    text << std::setw(6) << cell_label(step) << "  (" << step.cell.row << ',' << step.cell.col << ") "
         << direction_glyph(step.dir) << ' ' << action_name(step.action) << '\n';
  }
  out.text = text.str();
  return out;
}

}  // namespace phrlab
