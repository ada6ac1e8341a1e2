#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "phrlab/envs.h"
#include "phrlab/nn.h"

namespace phrlab {

struct PathStep {
  std::size_t index = 0;  // 1-based action index
  Cell cell;              // where the action was taken
  Direction dir = Direction::E;
  ActionId action = 0;
  bool evaluated = false;  // the model was evaluated to produce this action
};

struct PathRender {
  std::vector<PathStep> steps;
  bool reached_goal = false;
  std::string text;

  std::size_t length() const { return steps.size(); }
  std::vector<std::size_t> evaluation_indices() const;
};

/// Greedy multi-step episode on a grid environment, drawn as an overlay: each
/// visited cell shows the index of the first action taken there, bracketed when
/// that action came from a fresh model evaluation, followed by the full step list.
/// Throws UsageError for MiniPong.
PathRender render_path(const ModelParams& params, const EnvConfig& env_config, std::size_t horizon,
                       std::uint64_t seed);

}  // namespace phrlab
