#include "phrlab/agent.h"

#include <chrono>

#include "phrlab/error.h"
#include "phrlab/seeding.h"

namespace phrlab {

MultiStepAgent::MultiStepAgent(const ModelParams& params, std::size_t horizon) : params_(&params), horizon_(horizon) {
  if (horizon < 1 || horizon > params.spec().n_heads) {
    throw ConfigError("horizon " + std::to_string(horizon) + " needs a checkpoint with at least that many heads (has " +
                      std::to_string(params.spec().n_heads) + ")");
  }
}

ActionId MultiStepAgent::act(const Observation& observation, bool episode_just_reset) {
  if (episode_just_reset) buffer_.clear();
  last_evaluated_ = buffer_.empty();
  if (last_evaluated_) {
    const auto start = std::chrono::steady_clock::now();
    const ForwardPass pass = forward_batch(*params_, to_vector(observation), horizon_);
    for (const auto& probs : pass.probabilities) {
      buffer_.push_back(static_cast<ActionId>(argmax(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())))));
    }
    model_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++evaluations_;
  }
  const ActionId action = buffer_.front();
  buffer_.pop_front();
  return action;
}

EvalResult evaluate_policy(const ModelParams& params, const EnvConfig& env_config, std::size_t episodes,
                           std::size_t horizon, std::uint64_t seed) {
  Environment env(env_config);
  EpisodeSeeder seeds(seed, 0x6576616c);
  MultiStepAgent agent(params, horizon);
  EvalResult result;
  result.episodes = episodes;
  std::size_t successes = 0;
  double total_return = 0.0;
  double total_length = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation obs = env.reset(seeds.next());
    bool fresh = true;
    double ret = 0.0;
    double last_reward = 0.0;
    std::size_t length = 0;
    while (!env.done()) {
      StepResult step = env.step(agent.act(obs, fresh));
      fresh = false;
      ret += step.reward;
      last_reward = step.reward;
      ++length;
      obs = std::move(step.observation);
    }
    const bool success = env.is_grid()
                             ? last_reward > 0.0
                             : env.pong_state().score_player > env.pong_state().score_opponent;
    successes += success ? 1 : 0;
    total_return += ret;
    total_length += static_cast<double>(length);
  }
  if (episodes > 0) {
    const auto n = static_cast<double>(episodes);
    result.success_rate = static_cast<double>(successes) / n;
    result.mean_return = total_return / n;
    result.mean_length = total_length / n;
  }
  return result;
}

}  // namespace phrlab
