#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>

#include "phrlab/envs.h"
#include "phrlab/nn.h"

namespace phrlab {

/// Inference agent that performs `horizon` actions per model evaluation: the
/// argmax of each policy head, in head order. The buffer is discarded when an
/// episode ends, so a fresh evaluation happens on the first step of every episode.
class MultiStepAgent {
 public:
  MultiStepAgent(const ModelParams& params, std::size_t horizon);

  ActionId act(const Observation& observation, bool episode_just_reset);

  std::size_t horizon() const { return horizon_; }
  std::size_t evaluations() const { return evaluations_; }
  /// True when the most recent act() call evaluated the model.
  bool last_action_evaluated() const { return last_evaluated_; }
  std::size_t buffered() const { return buffer_.size(); }
  /// Seconds spent inside model evaluation since construction.
  double model_seconds() const { return model_seconds_; }

 private:
  const ModelParams* params_;
  std::size_t horizon_;
  std::deque<ActionId> buffer_;
  std::size_t evaluations_ = 0;
  bool last_evaluated_ = false;
  double model_seconds_ = 0.0;
};

struct EvalResult {
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;  // MiniPong: mean point differential
  double mean_length = 0.0;
};

/// Greedy evaluation of a multi-step agent. Grid success = positive final
/// reward; MiniPong success = player outscored the opponent.
EvalResult evaluate_policy(const ModelParams& params, const EnvConfig& env_config, std::size_t episodes,
                           std::size_t horizon, std::uint64_t seed);

}  // namespace phrlab
