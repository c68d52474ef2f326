#include <random>

#include <gtest/gtest.h>

#include "mapcomm/planner.hpp"
#include "oracles.hpp"

using namespace mapcomm;

namespace {

bool four_connected(const std::vector<Cell>& p) {
  for (std::size_t i = 1; i < p.size(); ++i)
    if (std::abs(p[i].row - p[i - 1].row) + std::abs(p[i].col - p[i - 1].col) != 1) return false;
  return true;
}

}  // namespace

TEST(CellCost, FeasibleAndSurcharged) {
  const PlannerParams p{0.025, 0.501, 100};
  EXPECT_DOUBLE_EQ(cell_cost(0.3, p), 0.325);
  EXPECT_DOUBLE_EQ(cell_cost(0.501, p), 0.526);
  EXPECT_DOUBLE_EQ(cell_cost(0.6, p), 100 * 0.526);
}

TEST(Plan, StartEqualsGoal) {
  const std::vector<double> est(9, 0.2);
  const Path p = plan(est, MapDims{3, 3}, {1, 1}, {1, 1}, {0.025, 0.501, 0});
  ASSERT_EQ(p.cells.size(), 1u);
  EXPECT_DOUBLE_EQ(p.cost, 0.225);
}

TEST(Plan, UniformMapGivesManhattanPath) {
  const std::vector<double> est(36, 0.1);
  const Path p = plan(est, MapDims{6, 6}, {0, 0}, {4, 5}, {0.025, 0.501, 0});
  EXPECT_EQ(p.cells.size(), 10u);
  EXPECT_TRUE(four_connected(p.cells));
  EXPECT_NEAR(p.cost, 10 * 0.125, 1e-12);
  const Path again = plan(est, MapDims{6, 6}, {0, 0}, {4, 5}, {0.025, 0.501, 0});
  EXPECT_EQ(p.cells, again.cells);
}

TEST(Plan, DetoursAroundWall) {
  // 5x5 with a wall in column 2 except at row 4.
  std::vector<double> est(25, 0.0);
  for (int r = 0; r < 4; ++r) est[static_cast<std::size_t>(r * 5 + 2)] = 0.9;
  const Path p = plan(est, MapDims{5, 5}, {0, 0}, {0, 4}, {0.025, 0.501, 0});
  for (Cell c : p.cells) EXPECT_LE(est[static_cast<std::size_t>(c.row * 5 + c.col)], 0.501);
  EXPECT_EQ(p.cells.size(), 13u);
  EXPECT_NEAR(p.cost, 13 * 0.025, 1e-12);
}

TEST(Plan, CrossesObstacleWhenNoAlternative) {
  std::vector<double> est(9, 0.0);
  for (int r = 0; r < 3; ++r) est[static_cast<std::size_t>(r * 3 + 1)] = 0.95;
  const Path p = plan(est, MapDims{3, 3}, {1, 0}, {1, 2}, {0.025, 0.501, 0});
  EXPECT_EQ(p.cells.size(), 3u);
  EXPECT_NEAR(p.cost, 0.025 + 9 * 0.526 + 0.025, 1e-12);
}

TEST(Plan, MatchesBruteForceOnSmallMaps) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pos(0, 3);
  const MapDims d{4, 4};
  const PlannerParams params{0.025, 0.501, 16};
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> est(16);
    for (double& v : est) v = u(rng);
    const Cell s{pos(rng), pos(rng)}, g{pos(rng), pos(rng)};
    std::vector<double> cost(16);
    for (std::size_t i = 0; i < 16; ++i) cost[i] = cell_cost(est[i], params);
    const Path p = plan(est, d, s, g, params);
    EXPECT_TRUE(four_connected(p.cells));
    EXPECT_EQ(p.cells.front(), s);
    EXPECT_EQ(p.cells.back(), g);
    EXPECT_NEAR(p.cost, oracle::brute_force_path_cost(cost, 4, 4, s, g), 1e-12) << trial;
  }
}

TEST(Plan, RejectsBadInput) {
  const std::vector<double> est(4, 0.0);
  EXPECT_THROW(plan(est, MapDims{3, 3}, {0, 0}, {1, 1}, {}), std::invalid_argument);
  EXPECT_THROW(plan(est, MapDims{2, 2}, {0, 0}, {2, 1}, {}), std::invalid_argument);
}

TEST(StraightLine, ConnectsEndpoints) {
  for (Cell g : {Cell{5, 9}, Cell{-3, 2}, Cell{0, -7}, Cell{4, 4}, Cell{0, 0}}) {
    const auto p = straight_line_path({0, 0}, g);
    EXPECT_EQ(p.front(), (Cell{0, 0}));
    EXPECT_EQ(p.back(), g);
    EXPECT_EQ(p.size(), static_cast<std::size_t>(std::abs(g.row) + std::abs(g.col) + 1));
    EXPECT_TRUE(four_connected(p));
  }
}
