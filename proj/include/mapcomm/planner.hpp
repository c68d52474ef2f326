#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "mapcomm/grid_map.hpp"

namespace mapcomm {

struct PlannerParams {
  double movement_penalty = 0.025;       // a
  double feasibility_threshold = 0.501;  // epsilon; estimates above it are priced as obstacles
  std::size_t cell_count = 0;            // N, scales the obstacle surcharge
};

struct Path {
  std::vector<Cell> cells;
  double cost = 0.0;
};

/// UP, DOWN, LEFT, RIGHT.
inline constexpr int kMoves[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

/// x + a for feasible cells (x <= epsilon), N (epsilon + a) otherwise.
inline double cell_cost(double estimate, const PlannerParams& p) {
  if (estimate <= p.feasibility_threshold) return estimate + p.movement_penalty;
  return static_cast<double>(p.cell_count) * (p.feasibility_threshold + p.movement_penalty);
}

/// Minimum vertex-cost 4-connected path from start to goal (both endpoints priced).
/// Ties resolve toward the lexicographically smallest (row, col) in the open set.
inline Path plan(std::span<const double> estimate, const MapDims& dims, Cell start, Cell goal, const PlannerParams& params) {
  if (estimate.size() != dims.size()) throw std::invalid_argument("plan: estimate size does not match map");
  if (!dims.contains(start) || !dims.contains(goal)) throw std::invalid_argument("plan: start or goal outside map");
  PlannerParams p = params;
  if (p.cell_count == 0) p.cell_count = dims.size();

  const std::size_t n = dims.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> prev(n, n);
  std::vector<char> done(n, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const std::size_t s = dims.index(start);
  const std::size_t g = dims.index(goal);
  dist[s] = cell_cost(estimate[s], p);
  open.emplace(dist[s], s);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (u == g) break;
    const Cell cu = dims.cell(u);
    for (const auto& mv : kMoves) {
      const Cell cv{cu.row + mv[0], cu.col + mv[1]};
      if (!dims.contains(cv)) continue;
      const std::size_t v = dims.index(cv);
      if (done[v]) continue;
      const double nd = d + cell_cost(estimate[v], p);
      if (nd < dist[v]) {
        dist[v] = nd;
        prev[v] = u;
        open.emplace(nd, v);
      }
    }
  }

  Path path;
  for (std::size_t v = g; v != n; v = prev[v]) {
    path.cells.push_back(dims.cell(v));
    if (v == s) break;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  for (Cell c : path.cells) path.cost += cell_cost(estimate[dims.index(c)], p);
  return path;
}

/// Provisional 4-connected path that hugs the straight segment start -> goal.
inline std::vector<Cell> straight_line_path(Cell start, Cell goal) {
  std::vector<Cell> out{start};
  const int dr = goal.row - start.row;
  const int dc = goal.col - start.col;
  const int steps = std::abs(dr) + std::abs(dc);
  Cell cur = start;
  for (int i = 0; i < steps; ++i) {
    // Advance along whichever axis lags the ideal line the most.
    const double t = static_cast<double>(i + 1) / steps;
    const double want_r = start.row + t * dr;
    const double want_c = start.col + t * dc;
    const bool can_r = cur.row != goal.row;
    const bool can_c = cur.col != goal.col;
    bool move_row = can_r && (!can_c || std::abs(want_r - cur.row) >= std::abs(want_c - cur.col));
    if (move_row)
      cur.row += dr > 0 ? 1 : -1;
    else
      cur.col += dc > 0 ? 1 : -1;
    out.push_back(cur);
  }
  return out;
}

}  // namespace mapcomm
