#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "phrlab/envs.h"

namespace phrlab::oracle {

/// Shortest action sequence from the state's agent pose to the goal, by BFS
/// over (row, col, dir) with the three grid actions. Written independently of
/// Environment::step: forward into a wall leaves the pose unchanged.
inline std::optional<std::vector<ActionId>> bfs_optimal_path(const GridState& s) {
  const int dr[4] = {-1, 0, 1, 0};
  const int dc[4] = {0, 1, 0, -1};
  auto id = [&](int r, int c, int d) { return static_cast<std::size_t>((r * s.width + c) * 4 + d); };
  const std::size_t states = static_cast<std::size_t>(s.width * s.height * 4);
  std::vector<int> parent(states, -1);
  std::vector<ActionId> via(states, 0);
  std::vector<bool> seen(states, false);
  std::queue<std::array<int, 3>> q;
  const int d0 = static_cast<int>(s.dir);
  seen[id(s.agent.row, s.agent.col, d0)] = true;
  q.push({s.agent.row, s.agent.col, d0});
  while (!q.empty()) {
    const auto [r, c, d] = q.front();
    q.pop();
    if (r == s.goal.row && c == s.goal.col) {
      std::vector<ActionId> path;
      for (auto k = static_cast<int>(id(r, c, d)); parent[static_cast<std::size_t>(k)] >= 0;
           k = parent[static_cast<std::size_t>(k)]) {
        path.push_back(via[static_cast<std::size_t>(k)]);
      }
      return std::vector<ActionId>(path.rbegin(), path.rend());
    }
    std::array<std::array<int, 3>, 3> next = {{{r, c, (d + 3) % 4}, {r, c, (d + 1) % 4}, {r + dr[d], c + dc[d], d}}};
    if (s.walls[static_cast<std::size_t>(next[2][0] * s.width + next[2][1])]) next[2] = {r, c, d};
    for (ActionId a = 0; a < 3; ++a) {
      const auto& n = next[static_cast<std::size_t>(a)];
      const std::size_t k = id(n[0], n[1], n[2]);
      if (seen[k]) continue;
      seen[k] = true;
      parent[k] = static_cast<int>(id(r, c, d));
      via[k] = a;
      q.push(n);
    }
  }
  return std::nullopt;
}

inline std::optional<std::size_t> bfs_optimal_actions(const GridState& s) {
  const auto path = bfs_optimal_path(s);
  if (!path) return std::nullopt;
  return path->size();
}

/// {t : 1 <= t <= m-n+1, t mod alpha == 0} by plain enumeration.
inline std::vector<std::size_t> brute_force_anchors(std::size_t m, std::size_t n, std::size_t alpha) {
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t + n <= m + 1; ++t) {
    if (t % alpha == 0) out.push_back(t);
  }
  return out;
}

}  // namespace phrlab::oracle
