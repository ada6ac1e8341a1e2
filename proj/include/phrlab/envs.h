#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace phrlab {

/// Fixed-length numeric encoding of an environment state.
using Observation = std::vector<float>;
using ActionId = int;

enum class EnvKind { FourRooms, Crossing, MiniPong };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

struct EnvConfig {
  EnvKind kind = EnvKind::FourRooms;
  int width = 13;
  int height = 13;
  int max_steps = 400;
  std::uint64_t seed = 0;

  /// Defaults for each kind: FourRooms 13x13/400, Crossing 9x9/324, MiniPong 16x12/3000.
  static EnvConfig defaults(EnvKind kind, std::uint64_t seed = 0);

  /// Throws ConfigError when dimensions or the step budget are out of range.
  void validate() const;

  bool operator==(const EnvConfig&) const = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

enum class Direction { N = 0, E = 1, S = 2, W = 3 };

enum GridAction : ActionId { kTurnLeft = 0, kTurnRight = 1, kForward = 2 };
enum PongAction : ActionId { kNoop = 0, kUp = 1, kDown = 2 };

inline constexpr int kNumGridActions = 3;
inline constexpr int kNumPongActions = 3;
inline constexpr int kPongWinningScore = 21;
inline constexpr int kPaddleHalfLength = 1;

struct GridState {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  Cell agent;
  Direction dir = Direction::E;
  Cell goal;
  int step_count = 0;
  int max_steps = 0;

  bool wall(int row, int col) const { return walls[static_cast<std::size_t>(row * width + col)] != 0; }
  bool operator==(const GridState&) const = default;
};

struct PongState {
  int width = 0;
  int height = 0;
  int ball_x = 0;
  int ball_y = 0;
  int ball_vx = 1;
  int ball_vy = 1;
  int paddle_player = 0;    // player paddle centre row, right edge
  int paddle_opponent = 0;  // scripted paddle centre row, left edge
  int score_player = 0;
  int score_opponent = 0;
  int opponent_credit = 0;  // quarter-steps of movement owed to the opponent
  int step_count = 0;
  int max_steps = 0;
  std::uint64_t serve_state = 0;

  bool operator==(const PongState&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// Pure encodings. Grid: one-hot {empty, wall, goal, agent} per cell followed by one-hot direction.
Observation encode_observation(const GridState& state);
/// MiniPong: ball x, y, vx, vy, both paddles and the ball-paddle offset, normalized.
Observation encode_observation(const PongState& state);

std::size_t observation_size(const EnvConfig& config);
int num_actions(EnvKind kind);

/// Gap row chosen by a Crossing reset for the given seed (interior rows only).
int crossing_gap_row(const EnvConfig& config, std::uint64_t episode_seed);

/// One environment instance. Not thread-safe; instances share no state.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  Observation reset(std::uint64_t episode_seed);
  StepResult step(ActionId action);
  Observation observe() const;

  /// Walls '#', agent '>v<^', goal 'G', ball 'o', paddles '|'.
  std::string render() const;

  const EnvConfig& config() const { return config_; }
  int num_actions() const { return phrlab::num_actions(config_.kind); }
  std::size_t observation_size() const { return phrlab::observation_size(config_); }
  bool done() const { return done_; }
  bool is_grid() const { return config_.kind != EnvKind::MiniPong; }

  const GridState& grid_state() const;
  const PongState& pong_state() const;

 private:
  StepResult step_grid(ActionId action);
  StepResult step_pong(ActionId action);

  EnvConfig config_;
  std::variant<GridState, PongState> state_;
  bool done_ = true;
};

/// Valid gap rows for Crossing (all interior rows of the dividing column).
std::vector<int> crossing_gap_slots(const EnvConfig& config);

char direction_glyph(Direction dir);
Cell step_forward(Cell cell, Direction dir);

}  // namespace phrlab
