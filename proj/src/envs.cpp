#include "phrlab/envs.h"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <sstream>

#include "phrlab/error.h"
#include "phrlab/seeding.h"

namespace phrlab {
namespace {

// Classic four-rooms map (13x13 including the border).
constexpr std::array<std::string_view, 13> kFourRoomsMap = {
    "#############",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#     #     #",
    "## ####     #",
    "#     ### ###",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#############",
};

constexpr int kCellChannels = 4;  // empty, wall, goal, agent
constexpr std::size_t kPongFeatures = 7;

GridState empty_grid(const EnvConfig& config) {
  GridState s;
  s.width = config.width;
  s.height = config.height;
  s.max_steps = config.max_steps;
  s.walls.assign(static_cast<std::size_t>(config.width * config.height), 0);
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      if (r == 0 || c == 0 || r == config.height - 1 || c == config.width - 1) {
        s.walls[static_cast<std::size_t>(r * config.width + c)] = 1;
      }
    }
  }
  return s;
}

GridState make_four_rooms(const EnvConfig& config) {
  GridState s = empty_grid(config);
  for (int r = 0; r < config.height; ++r) {
    for (int c = 0; c < config.width; ++c) {
      s.walls[static_cast<std::size_t>(r * config.width + c)] = kFourRoomsMap[r][c] == '#' ? 1 : 0;
    }
  }
  s.agent = {1, 1};
  s.dir = Direction::E;
  s.goal = {config.height - 2, config.width - 2};
  return s;
}

GridState make_crossing(const EnvConfig& config, std::uint64_t episode_seed) {
  GridState s = empty_grid(config);
  const int wall_col = config.width / 2;
  const int gap = crossing_gap_row(config, episode_seed);
  for (int r = 1; r < config.height - 1; ++r) {
    if (r != gap) s.walls[static_cast<std::size_t>(r * config.width + wall_col)] = 1;
  }
  s.agent = {1, 1};
  s.dir = Direction::E;
  s.goal = {config.height - 2, config.width - 2};
  return s;
}

Rng serve_rng(std::uint64_t& state) {
  state = mix64(state);
  return Rng(state);
}

void serve(PongState& s) {
  Rng rng = serve_rng(s.serve_state);
  s.ball_x = s.width / 2;
  s.ball_y = s.height / 2;
  s.ball_vx = (rng() & 1U) ? 1 : -1;
  s.ball_vy = (rng() & 2U) ? 1 : -1;
}

PongState make_pong(const EnvConfig& config, std::uint64_t episode_seed) {
  PongState s;
  s.width = config.width;
  s.height = config.height;
  s.max_steps = config.max_steps;
  s.paddle_player = config.height / 2;
  s.paddle_opponent = config.height / 2;
  s.serve_state = derive_seed(episode_seed, {0x706f6e67});
  serve(s);
  return s;
}

int clamp_paddle(int y, int height) {
  return std::clamp(y, kPaddleHalfLength, height - 1 - kPaddleHalfLength);
}

}  // namespace

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::FourRooms: return "FourRooms";
    case EnvKind::Crossing: return "Crossing";
    case EnvKind::MiniPong: return "MiniPong";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "FourRooms") return EnvKind::FourRooms;
  if (name == "Crossing") return EnvKind::Crossing;
  if (name == "MiniPong") return EnvKind::MiniPong;
  throw ConfigError("unknown env kind '" + std::string(name) + "' (expected FourRooms, Crossing or MiniPong)");
}

EnvConfig EnvConfig::defaults(EnvKind kind, std::uint64_t seed) {
  switch (kind) {
    case EnvKind::FourRooms: return {kind, 13, 13, 400, seed};
    case EnvKind::Crossing: return {kind, 9, 9, 324, seed};
    case EnvKind::MiniPong: return {kind, 16, 12, 3000, seed};
  }
  return {};
}

void EnvConfig::validate() const {
  if (width < 5 || height < 5) {
    throw ConfigError("env width and height must be >= 5 (got " + std::to_string(width) + "x" +
                      std::to_string(height) + ")");
  }
  if (max_steps < width * height) {
    throw ConfigError("env max_steps must be >= width*height (" + std::to_string(width * height) + ")");
  }
  if (kind == EnvKind::FourRooms && (width != 13 || height != 13)) {
    throw ConfigError("FourRooms uses the fixed 13x13 layout");
  }
}

std::size_t observation_size(const EnvConfig& config) {
  if (config.kind == EnvKind::MiniPong) return kPongFeatures;
  return static_cast<std::size_t>(config.width * config.height * kCellChannels + 4);
}

int num_actions(EnvKind kind) {
  return kind == EnvKind::MiniPong ? kNumPongActions : kNumGridActions;
}

std::vector<int> crossing_gap_slots(const EnvConfig& config) {
  std::vector<int> slots;
  for (int r = 1; r < config.height - 1; ++r) slots.push_back(r);
  return slots;
}

int crossing_gap_row(const EnvConfig& config, std::uint64_t episode_seed) {
  Rng rng(derive_seed(episode_seed, {0x6761700}));
  return 1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(config.height - 2)));
}

char direction_glyph(Direction dir) {
  switch (dir) {
    case Direction::N: return '^';
    case Direction::E: return '>';
    case Direction::S: return 'v';
    case Direction::W: return '<';
  }
  return '?';
}

Cell step_forward(Cell cell, Direction dir) {
  switch (dir) {
    case Direction::N: return {cell.row - 1, cell.col};
    case Direction::E: return {cell.row, cell.col + 1};
    case Direction::S: return {cell.row + 1, cell.col};
    case Direction::W: return {cell.row, cell.col - 1};
  }
  return cell;
}

Observation encode_observation(const GridState& state) {
  Observation obs(static_cast<std::size_t>(state.width * state.height * kCellChannels + 4), 0.0f);
  for (int r = 0; r < state.height; ++r) {
    for (int c = 0; c < state.width; ++c) {
      int channel = 0;
      if (state.wall(r, c)) {
        channel = 1;
      } else if (state.agent == Cell{r, c}) {
        channel = 3;
      } else if (state.goal == Cell{r, c}) {
        channel = 2;
      }
      obs[static_cast<std::size_t>((r * state.width + c) * kCellChannels + channel)] = 1.0f;
    }
  }
  obs[static_cast<std::size_t>(state.width * state.height * kCellChannels + static_cast<int>(state.dir))] = 1.0f;
  return obs;
}

Observation encode_observation(const PongState& state) {
  const auto w = static_cast<float>(state.width - 1);
  const auto h = static_cast<float>(state.height - 1);
  return {
      static_cast<float>(state.ball_x) / w,
      static_cast<float>(state.ball_y) / h,
      static_cast<float>(state.ball_vx),
      static_cast<float>(state.ball_vy),
      static_cast<float>(state.paddle_player) / h,
      static_cast<float>(state.paddle_opponent) / h,
      static_cast<float>(state.ball_y - state.paddle_player) / h,
  };
}

Environment::Environment(EnvConfig config) : config_(config) {
  config_.validate();
  if (config_.kind == EnvKind::MiniPong) {
    state_ = make_pong(config_, config_.seed);
  } else if (config_.kind == EnvKind::Crossing) {
    state_ = make_crossing(config_, config_.seed);
  } else {
    state_ = make_four_rooms(config_);
  }
}

Observation Environment::reset(std::uint64_t episode_seed) {
  switch (config_.kind) {
    case EnvKind::FourRooms: state_ = make_four_rooms(config_); break;
    case EnvKind::Crossing: state_ = make_crossing(config_, episode_seed); break;
    case EnvKind::MiniPong: state_ = make_pong(config_, episode_seed); break;
  }
  done_ = false;
  return observe();
}

Observation Environment::observe() const {
  return std::visit([](const auto& s) { return encode_observation(s); }, state_);
}

const GridState& Environment::grid_state() const {
  if (!is_grid()) throw UsageError("grid_state() called on a MiniPong environment");
  return std::get<GridState>(state_);
}

const PongState& Environment::pong_state() const {
  if (is_grid()) throw UsageError("pong_state() called on a grid environment");
  return std::get<PongState>(state_);
}

StepResult Environment::step(ActionId action) {
  if (done_) throw UsageError("step() called on a finished episode; call reset() first");
  if (action < 0 || action >= num_actions()) {
    throw UsageError("action " + std::to_string(action) + " out of range");
  }
  return is_grid() ? step_grid(action) : step_pong(action);
}

StepResult Environment::step_grid(ActionId action) {
  auto& s = std::get<GridState>(state_);
  ++s.step_count;
  switch (action) {
    case kTurnLeft: s.dir = static_cast<Direction>((static_cast<int>(s.dir) + 3) % 4); break;
    case kTurnRight: s.dir = static_cast<Direction>((static_cast<int>(s.dir) + 1) % 4); break;
    case kForward: {
      const Cell next = step_forward(s.agent, s.dir);
      if (!s.wall(next.row, next.col)) s.agent = next;
      break;
    }
    default: break;
  }
  StepResult result;
  if (s.agent == s.goal) {
    result.reward = 1.0 - 0.9 * static_cast<double>(s.step_count) / static_cast<double>(s.max_steps);
    result.done = true;
  } else if (s.step_count >= s.max_steps) {
    result.done = true;
  }
  done_ = result.done;
  result.observation = encode_observation(s);
  return result;
}

StepResult Environment::step_pong(ActionId action) {
  auto& s = std::get<PongState>(state_);
  ++s.step_count;
  if (action == kUp) s.paddle_player = clamp_paddle(s.paddle_player - 1, s.height);
  if (action == kDown) s.paddle_player = clamp_paddle(s.paddle_player + 1, s.height);

  // Opponent tracks the ball at 3/4 of the ball's vertical speed.
  s.opponent_credit += 3;
  if (s.opponent_credit >= 4) {
    s.opponent_credit -= 4;
    if (s.paddle_opponent < s.ball_y) s.paddle_opponent = clamp_paddle(s.paddle_opponent + 1, s.height);
    if (s.paddle_opponent > s.ball_y) s.paddle_opponent = clamp_paddle(s.paddle_opponent - 1, s.height);
  }

  StepResult result;
  int ny = s.ball_y + s.ball_vy;
  if (ny < 0 || ny > s.height - 1) {
    s.ball_vy = -s.ball_vy;
    ny = s.ball_y + s.ball_vy;
  }
  int nx = s.ball_x + s.ball_vx;
  const auto bounce = [&](int paddle, int rebound_x, int new_vx) {
    const int offset = ny - paddle;
    if (offset < -kPaddleHalfLength || offset > kPaddleHalfLength) return false;
    s.ball_vx = new_vx;
    if (offset != 0) s.ball_vy = offset;
    nx = rebound_x;
    return true;
  };
  bool point = false;
  if (nx == s.width - 1 && !bounce(s.paddle_player, s.width - 2, -1)) {
    ++s.score_opponent;
    result.reward = -1.0;
    point = true;
  } else if (nx == 0 && !bounce(s.paddle_opponent, 1, 1)) {
    ++s.score_player;
    result.reward = 1.0;
    point = true;
  }
  if (point) {
    serve(s);
  } else {
    s.ball_x = nx;
    s.ball_y = ny;
  }
  result.done = s.score_player >= kPongWinningScore || s.score_opponent >= kPongWinningScore ||
                s.step_count >= s.max_steps;
  done_ = result.done;
  result.observation = encode_observation(s);
  return result;
}

std::string Environment::render() const {
  std::ostringstream out;
  if (is_grid()) {
    const auto& s = std::get<GridState>(state_);
    for (int r = 0; r < s.height; ++r) {
      for (int c = 0; c < s.width; ++c) {
        char ch = ' ';
        if (s.wall(r, c)) {
          ch = '#';
        } else if (s.agent == Cell{r, c}) {
          ch = direction_glyph(s.dir);
        } else if (s.goal == Cell{r, c}) {
          ch = 'G';
        }
        out << ch;
      }
      out << '\n';
    }
    return out.str();
  }
  const auto& s = std::get<PongState>(state_);
  out << std::string(static_cast<std::size_t>(s.width), '-') << '\n';
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      char ch = ' ';
      if (x == 0 && std::abs(y - s.paddle_opponent) <= kPaddleHalfLength) ch = '|';
      if (x == s.width - 1 && std::abs(y - s.paddle_player) <= kPaddleHalfLength) ch = '|';
      if (x == s.ball_x && y == s.ball_y) ch = 'o';
      out << ch;
    }
    out << '\n';
  }
  out << std::string(static_cast<std::size_t>(s.width), '-') << '\n';
  out << "score " << s.score_player << " : " << s.score_opponent << '\n';
  return out.str();
}

}  // namespace phrlab
