#include <gtest/gtest.h>

#include "phrlab/error.h"
#include "phrlab/render.h"

using namespace phrlab;

namespace {

ModelParams grid_model(const EnvConfig& env, std::size_t heads, std::uint64_t seed) {
  NetSpec spec;
  spec.input_dim = observation_size(env);
  spec.hidden_layers = {16};
  spec.head_width = 16;
  spec.n_heads = heads;
  spec.n_actions = 3;
  return ModelParams::initialize(spec, seed);
}

}  // namespace

TEST(RenderPath, EvaluationsEveryHorizonActions) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::FourRooms);
  const ModelParams p = grid_model(env, 4, 1);
  const PathRender r = render_path(p, env, 4, 0);
  ASSERT_GT(r.length(), 8u);
  const auto evals = r.evaluation_indices();
  for (std::size_t k = 0; k < evals.size(); ++k) EXPECT_EQ(evals[k], 1 + 4 * k);
  EXPECT_EQ(evals.size(), (r.length() + 3) / 4);
  EXPECT_NE(r.text.find("[1]"), std::string::npos);
  EXPECT_NE(r.text.find("steps (bracketed = model evaluation):"), std::string::npos);
}

TEST(RenderPath, StepsFollowTheEnvironment) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::FourRooms);
  const PathRender r = render_path(grid_model(env, 2, 2), env, 2, 0);
  Environment e(env);
  e.reset(0);
  for (const PathStep& s : r.steps) {
    EXPECT_EQ(e.grid_state().agent, s.cell);
    EXPECT_EQ(e.grid_state().dir, s.dir);
    e.step(s.action);
  }
}

TEST(RenderPath, IsDeterministic) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::Crossing, 3);
  const ModelParams p = grid_model(env, 4, 3);
  EXPECT_EQ(render_path(p, env, 4, 5).text, render_path(p, env, 4, 5).text);
}

TEST(RenderPath, RejectsMiniPong) {
  const EnvConfig env = EnvConfig::defaults(EnvKind::MiniPong);
  NetSpec spec;
  spec.input_dim = observation_size(env);
  spec.n_actions = 3;
  spec.hidden_layers = {4};
  spec.head_width = 4;
  EXPECT_THROW(render_path(ModelParams::initialize(spec, 1), env, 1, 0), UsageError);
}
