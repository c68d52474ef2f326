#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mapcomm/grid_map.hpp"

using namespace mapcomm;

TEST(MapDims, IndexRoundTripIsRowMajor) {
  const MapDims d{3, 5};
  EXPECT_EQ(d.index({1, 2}), 7u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.index(d.cell(i)), i);
  EXPECT_FALSE(d.contains({3, 0}));
  EXPECT_FALSE(d.contains({0, -1}));
}

TEST(GridMap, RejectsValuesOutsideUnitInterval) {
  EXPECT_THROW(GridMap(1, 2, {0.5, 1.5}), DataError);
  EXPECT_THROW(GridMap(2, 2, {0.1, 0.2, 0.3}), std::invalid_argument);
  const GridMap m(2, 2, {0.0, 0.25, 0.5, 1.0});
  EXPECT_EQ(m.width(), 2);
  EXPECT_DOUBLE_EQ(m.at({1, 0}), 0.5);
  EXPECT_THROW(m.at({2, 0}), std::out_of_range);
}

TEST(Window, InteriorWindowIsTheCentralBlock) {
  const MapDims d{5, 5};
  const Window w = window_at(d, {2, 2}, 3, 3);
  const std::vector<std::size_t> want{6, 7, 8, 11, 12, 13, 16, 17, 18};
  EXPECT_EQ(w.cells, want);
}

TEST(Window, CornerWindowIsClipped) {
  const Window w = window_at(MapDims{5, 5}, {0, 0}, 3, 3);
  const std::vector<std::size_t> want{0, 1, 5, 6};
  EXPECT_EQ(w.cells, want);
}

TEST(Window, ActorFieldOfViewOnLargeMap) {
  EXPECT_EQ(window_at(MapDims{128, 128}, {12, 57}, 5, 5).cells.size(), 25u);
  EXPECT_EQ(window_at(MapDims{128, 128}, {64, 64}, 15, 15).cells.size(), 225u);
}

TEST(Window, ClippedWindowIsIntersectionWithMap) {
  const MapDims d{7, 6};
  for (int r = 0; r < d.rows; ++r) {
    for (int c = 0; c < d.cols; ++c) {
      const Window w = window_at(d, {r, c}, 5, 3);
      std::vector<std::size_t> want;
      for (int rr = r - 1; rr <= r + 1; ++rr)
        for (int cc = c - 2; cc <= c + 2; ++cc)
          if (d.contains({rr, cc})) want.push_back(d.index({rr, cc}));
      EXPECT_EQ(w.cells, want) << r << "," << c;
    }
  }
}

TEST(Window, CenterOutsideMapThrows) {
  EXPECT_THROW(window_at(MapDims{4, 4}, {4, 0}, 3, 3), std::invalid_argument);
  EXPECT_THROW(window_at(MapDims{4, 4}, {1, 1}, 0, 3), std::invalid_argument);
}

TEST(Rescale, ConstantInputGivesZeros) {
  const std::vector<double> raw{3.0, 3.0, 3.0};
  for (double v : rescale_unit(raw)) EXPECT_EQ(v, 0.0);
  const std::vector<double> ramp{2.0, 4.0, 3.0};
  const auto u = rescale_unit(ramp);
  EXPECT_DOUBLE_EQ(u[0], 0.0);
  EXPECT_DOUBLE_EQ(u[1], 1.0);
  EXPECT_DOUBLE_EQ(u[2], 0.5);
}

TEST(TextMatrix, ParsesHeaderAndRows) {
  std::istringstream in("2 3\n0 1 2\n3 4.5 -1e-1\n");
  const RawRaster r = parse_text_matrix(in);
  EXPECT_EQ(r.rows, 2);
  EXPECT_EQ(r.cols, 3);
  EXPECT_DOUBLE_EQ(r.values[4], 4.5);
  EXPECT_DOUBLE_EQ(r.values[5], -0.1);
}

TEST(TextMatrix, ErrorsNameTheLine) {
  std::istringstream short_row("2 2\n0 1\n0\n");
  try {
    parse_text_matrix(short_row);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::istringstream junk("1 2\n0 abc\n");
  EXPECT_THROW(parse_text_matrix(junk), FormatError);
  std::istringstream nan("1 2\n0 nan\n");
  EXPECT_THROW(parse_text_matrix(nan), DataError);
  std::istringstream missing("2 1\n0\n");
  EXPECT_THROW(parse_text_matrix(missing), FormatError);
}

TEST(Graymap, ParsesBinaryPayload) {
  std::string bytes = "P5\n# comment\n2 2\n255\n";
  bytes += std::string{'\x00', '\x33', '\x66', '\xff'};
  const RawRaster r = parse_graymap(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
  EXPECT_EQ(r.rows, 2);
  EXPECT_DOUBLE_EQ(r.values[1], 0x33 / 255.0);
  EXPECT_DOUBLE_EQ(r.values[3], 1.0);
}

TEST(Graymap, TruncatedDataIsAFormatError) {
  const std::string bytes = "P5 3 3 255\n\x01\x02";
  EXPECT_THROW(parse_graymap(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size())), FormatError);
  const std::string magic = "P2 1 1 255\n1";
  EXPECT_THROW(parse_graymap(std::span(reinterpret_cast<const unsigned char*>(magic.data()), magic.size())), FormatError);
}

TEST(LoadRaster, MissingFileNamesThePath) {
  try {
    load_raster("/nonexistent/dir/map.txt", RasterFormat::kTextMatrix);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/map.txt"), std::string::npos);
  }
}

TEST(LoadRaster, TextRoundTripAfterRescale) {
  const GridMap m = smooth_obstacle_map(9, 7, 4);
  const auto path = std::filesystem::temp_directory_path() / "mapcomm_grid_roundtrip.txt";
  {
    std::ofstream out(path);
    write_text_matrix(out, m);
  }
  const GridMap back = load_raster(path, RasterFormat::kTextMatrix);
  ASSERT_EQ(back.dims(), m.dims());
  // smooth_obstacle_map already spans [0,1], so rescaling is the identity.
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(back[i], m[i], 1e-15);
  std::filesystem::remove(path);
}

TEST(Inclination, HandComputedStrip) {
  // z = (|0-1|, |1-0| + |1-3|, |3-1|) = (1, 3, 2) -> (0, 1, 0.5)
  const std::vector<double> depth{0.0, 1.0, 3.0};
  const auto r = depth_to_inclination(1, 3, depth);
  EXPECT_FALSE(r.flat);
  EXPECT_DOUBLE_EQ(r.map[0], 0.0);
  EXPECT_DOUBLE_EQ(r.map[1], 1.0);
  EXPECT_DOUBLE_EQ(r.map[2], 0.5);
}

TEST(Inclination, ConstantDepthIsFlat) {
  const std::vector<double> depth(12, 4.2);
  const auto r = depth_to_inclination(3, 4, depth);
  EXPECT_TRUE(r.flat);
  for (double v : r.map.values()) EXPECT_EQ(v, 0.0);
}

TEST(Inclination, InvariantToShiftAndPositiveScale) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<double> depth(30), moved(30);
  for (int i = 0; i < 30; ++i) {
    depth[i] = u(rng);
    moved[i] = 3.5 * depth[i] + 17.0;
  }
  for (auto nb : {Neighborhood::kFour, Neighborhood::kEight}) {
    const auto a = depth_to_inclination(5, 6, depth, nb);
    const auto b = depth_to_inclination(5, 6, moved, nb);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(a.map[i], b.map[i], 1e-12);
  }
}

TEST(SyntheticMap, DeterministicAndNormalized) {
  const GridMap a = smooth_obstacle_map(32, 40, 9);
  const GridMap b = smooth_obstacle_map(32, 40, 9);
  const GridMap c = smooth_obstacle_map(32, 40, 10);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  EXPECT_DOUBLE_EQ(*std::min_element(a.values().begin(), a.values().end()), 0.0);
  EXPECT_DOUBLE_EQ(*std::max_element(a.values().begin(), a.values().end()), 1.0);
}
