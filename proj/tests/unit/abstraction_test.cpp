#include <sstream>

#include <gtest/gtest.h>

#include "mapcomm/abstraction.hpp"

using namespace mapcomm;

namespace {

AbstractionTemplate two_blocks() {
  // 3x3 window: left column averaged, centre cell alone.
  return {7, {3, 3}, {{{0, 0}, {1, 0}, {2, 0}}, {{1, 1}}}};
}

}  // namespace

TEST(Codebook, BuiltinSixteenIsValid) {
  const Codebook cb = builtin_codebook_16();
  EXPECT_NO_THROW(cb.validate());
  ASSERT_EQ(cb.templates.size(), 16u);
  EXPECT_EQ(cb.window, (WindowShape{15, 15}));
  EXPECT_EQ(cb.bits_per_measurement, 12);
  EXPECT_EQ(cb.bits_per_index, 4);
  for (int id = 1; id <= 16; ++id) ASSERT_NE(cb.find(id), nullptr) << id;
  EXPECT_EQ(cb.find(1)->k(), 225u);
  EXPECT_EQ(cb.max_k(), 225u);
}

TEST(Codebook, BuiltinSevenBySevenIsValid) {
  const Codebook cb = builtin_codebook_7x7();
  EXPECT_NO_THROW(cb.validate());
  EXPECT_EQ(cb.templates.size(), 10u);
  EXPECT_EQ(cb.window, (WindowShape{7, 7}));
}

TEST(Codebook, IndexBitsMustCoverTheSet) {
  Codebook cb = builtin_codebook_16();
  cb.bits_per_index = 3;
  EXPECT_THROW(cb.validate(), std::invalid_argument);
}

TEST(Template, OverlappingBlocksRejected) {
  AbstractionTemplate t{1, {3, 3}, {{{0, 0}, {0, 1}}, {{0, 1}}}};
  EXPECT_THROW(t.validate(), std::invalid_argument);
  AbstractionTemplate out{2, {3, 3}, {{{3, 0}}}};
  EXPECT_THROW(out.validate(), std::invalid_argument);
}

TEST(Operator, IdentityTemplateInterior) {
  const Codebook cb = builtin_codebook_16();
  const MapDims d{64, 64};
  const auto op = instantiate_operator(*cb.find(1), d, {30, 30});
  ASSERT_EQ(op.rows(), 225u);
  for (const auto& r : op.row_list()) {
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_EQ(r.coefficient(), 1.0);
  }
  EXPECT_EQ(op.support().front(), d.index({23, 23}));
  EXPECT_EQ(op.support().back(), d.index({37, 37}));
}

TEST(Operator, IdentityTemplateClippedAtCorner) {
  const auto op = instantiate_operator(*builtin_codebook_16().find(1), MapDims{64, 64}, {0, 0});
  EXPECT_EQ(op.rows(), 64u);  // 8 x 8 of the window remains
}

TEST(Operator, BlocksClippedAwayAreDropped) {
  const MapDims d{4, 4};
  const auto interior = instantiate_operator(two_blocks(), d, {1, 1});
  EXPECT_EQ(interior.rows(), 2u);
  // At column 0 the window's left column is off the map.
  const auto edge = instantiate_operator(two_blocks(), d, {1, 0});
  ASSERT_EQ(edge.rows(), 1u);
  EXPECT_EQ(edge.row(0).cells, std::vector<std::size_t>{d.index({1, 0})});
}

TEST(Operator, PartiallyClippedBlockAveragesRemainingCells) {
  const MapDims d{4, 4};
  const auto op = instantiate_operator(two_blocks(), d, {0, 1});
  ASSERT_EQ(op.rows(), 2u);
  EXPECT_EQ(op.row(0).cells.size(), 2u);  // rows -1 is clipped
  std::vector<double> x(16, 0.0);
  x[d.index({0, 0})] = 0.2;
  x[d.index({1, 0})] = 0.6;
  x[d.index({0, 1})] = 0.9;
  const auto o = op.apply(x);
  EXPECT_DOUBLE_EQ(o[0], 0.4);
  EXPECT_DOUBLE_EQ(o[1], 0.9);
}

TEST(Operator, SparseMatchesApply) {
  const MapDims d{20, 20};
  const auto op = instantiate_operator(*builtin_codebook_16().find(3), d, {10, 9});
  std::vector<double> x(d.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::fmod(0.37 * static_cast<double>(i), 1.0);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd viaSparse = op.to_sparse() * xv;
  EXPECT_LT((viaSparse - op.apply(x)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(op.rows(), 33u);
}

TEST(Operator, InvalidRowsRejected) {
  EXPECT_THROW(ObservationOperator(4, {{{}}}), std::invalid_argument);
  EXPECT_THROW(ObservationOperator(4, {{{1, 4}}}), std::invalid_argument);
  EXPECT_THROW(ObservationOperator(4, {{{1, 1}}}), std::invalid_argument);
}

TEST(Operator, RawWindowHasOneRowPerCell) {
  const MapDims d{128, 128};
  const auto op = raw_window_operator(window_at(d, {64, 64}, 15, 15), d);
  EXPECT_EQ(op.rows(), 225u);
  EXPECT_TRUE(op.source().is_raw());
}

TEST(Bits, TemplateAndRawCosts) {
  const Codebook cb = builtin_codebook_16();
  EXPECT_EQ(bits_for(225, true, cb), 2700);
  EXPECT_EQ(bits_for(225, false, cb), 2704);
  EXPECT_EQ(bits_for(1, false, cb), 16);
  EXPECT_EQ(bits_for(2, false, cb), 28);
  std::int64_t prev = -1;
  for (std::size_t k = 0; k <= 225; ++k) {
    EXPECT_GE(bits_for(k, false, cb), prev);
    prev = bits_for(k, false, cb);
  }
}

TEST(Bits, InstantiatedOperatorCost) {
  const Codebook cb = builtin_codebook_16();
  const auto op = instantiate_operator(*cb.find(6), MapDims{64, 64}, {30, 30});
  EXPECT_EQ(op.rows(), 9u);
  EXPECT_EQ(bits_for(op, cb), 9 * 12 + 4);
}

TEST(ClippingNeverIncreasesK, AllTemplatesAllPositions) {
  const Codebook cb = builtin_codebook_7x7();
  const MapDims d{9, 10};
  for (const auto& t : cb.templates)
    for (int r = 0; r < d.rows; ++r)
      for (int c = 0; c < d.cols; ++c) EXPECT_LE(instantiate_operator(t, d, {r, c}).rows(), t.k());
}

TEST(CodebookText, RoundTrip) {
  const Codebook cb = builtin_codebook_16();
  std::stringstream s;
  write_codebook(s, cb);
  const Codebook back = parse_codebook(s);
  ASSERT_EQ(back.templates.size(), cb.templates.size());
  EXPECT_EQ(back.window, cb.window);
  for (std::size_t i = 0; i < cb.templates.size(); ++i) {
    EXPECT_EQ(back.templates[i].id, cb.templates[i].id);
    EXPECT_EQ(back.templates[i].blocks, cb.templates[i].blocks);
  }
}

TEST(CodebookText, ParsesHandWrittenSpec) {
  std::istringstream in(
      "# two templates\n"
      "window 3 3\n"
      "bits 8 1\n"
      "template 1\n"
      "0,0 0,1 1,0 1,1\n"
      "2,2\n"
      "template 2\n"
      "1,1\n");
  const Codebook cb = parse_codebook(in);
  EXPECT_EQ(cb.bits_per_measurement, 8);
  EXPECT_EQ(cb.bits_per_index, 1);
  ASSERT_EQ(cb.templates.size(), 2u);
  EXPECT_EQ(cb.templates[0].k(), 2u);
  EXPECT_EQ(cb.templates[0].blocks[0].size(), 4u);
}

TEST(CodebookText, ErrorsNameTheLine) {
  std::istringstream in("window 3 3\ntemplate 1\n0,0 9,9\n");
  try {
    parse_codebook(in);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}
