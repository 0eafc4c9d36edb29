#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "caldesing/fractal.hpp"

using namespace caldesing;

TEST(Cantor, EndpointsFollowTheConstruction) {
  CantorSpec spec;
  spec.depth = 2;
  const auto left = cantor_left_endpoints(spec);
  ASSERT_EQ(left.size(), 4u);
  EXPECT_DOUBLE_EQ(left[0], 0.0);
  EXPECT_DOUBLE_EQ(left[1], 2.0 / 9.0);
  EXPECT_DOUBLE_EQ(left[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(left[3], 8.0 / 9.0);
  EXPECT_NEAR(spec.dimension(), std::log(2.0) / std::log(3.0), 1e-15);
}

TEST(Cantor, ThirdsAtDepthOneGiveTwoRuns) {
  CantorSpec spec;
  spec.depth = 1;
  const auto s = cantor_generate(spec, 1.0, 3);
  ASSERT_EQ(s.size(), 6u);
  for (int i : {0, 1, 2, 5, 6, 7}) EXPECT_TRUE(s.contains_cell({i, 0, 0, 0})) << i;
}

TEST(Cantor, QuartersAtDepthTwoGiveFourCells) {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = 2;
  const auto s = cantor_generate(spec);
  EXPECT_EQ(s.depth(), 4);
  ASSERT_EQ(s.size(), 4u);
  for (int i : {0, 3, 12, 15}) EXPECT_TRUE(s.contains_cell({i, 0, 0, 0})) << i;
}

TEST(Cantor, CountLawAtDyadicRatios) {
  // With ratio 1/4 each construction interval is exactly one cell at depth 2d.
  for (int d = 1; d <= 6; ++d) {
    CantorSpec spec;
    spec.ratio = 0.25;
    spec.depth = d;
    const auto s = cantor_generate(spec);
    EXPECT_EQ(s.size(), std::size_t{1} << d);
    for (int e = 0; e <= d; ++e) EXPECT_EQ(s.coarsened(2 * e).size(), std::size_t{1} << e);
  }
}

TEST(Cantor, DistinctIntervalsStaySeparated) {
  CantorSpec spec;
  spec.depth = 5;
  const auto s = cantor_generate(spec);
  // Runs of consecutive cells match the 32 construction intervals.
  int runs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i == 0 || s.cell(i)[0] != s.cell(i - 1)[0] + 1) ++runs;
  EXPECT_EQ(runs, 32);
}

TEST(Cantor, RejectsBadSpecs) {
  CantorSpec spec;
  spec.ratio = 0.5;
  EXPECT_THROW(cantor_generate(spec), std::invalid_argument);
  spec.ratio = 1.0 / 3.0;
  spec.offset = 0.5;
  EXPECT_THROW(cantor_generate(spec), std::invalid_argument);
  spec.offset = 0.0;
  spec.depth = 4;
  EXPECT_THROW(cantor_generate(spec, 1.0, 3), std::invalid_argument);
  EXPECT_THROW(ratio_for_dimension(1.0), std::invalid_argument);
}

TEST(Cantor, RatioForDimensionInvertsTheDimension) {
  for (double a : {0.2, 0.5, std::log(2.0) / std::log(3.0), 0.9}) {
    CantorSpec spec;
    spec.ratio = ratio_for_dimension(a);
    EXPECT_NEAR(spec.dimension(), a, 1e-14);
  }
}

TEST(BoxDim, ExactSlopeForDyadicCantor) {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = 7;
  const auto s = cantor_generate(spec);
  const auto est = box_dim(s, cantor_box_min_depth(spec, 1.0), cantor_box_depth(spec, 1.0));
  EXPECT_NEAR(est.slope, 0.5, 1e-12);
  EXPECT_FALSE(est.degenerate);
}

TEST(BoxDim, MiddleThirdsWithinTolerance) {
  CantorSpec spec;
  spec.depth = 8;
  const auto s = cantor_generate(spec);
  const auto est = box_dim(s, cantor_box_min_depth(spec, 1.0), cantor_box_depth(spec, 1.0));
  EXPECT_NEAR(est.slope, spec.dimension(), 0.05);
}

TEST(BoxDim, FullAndPointSets) {
  EXPECT_NEAR(box_dim(DyadicCellSet::full(1, 1.0, 10), 2, 10).slope, 1.0, 1e-12);
  EXPECT_NEAR(box_dim(DyadicCellSet::full(2, 1.0, 8), 2, 8).slope, 2.0, 1e-12);
  EXPECT_NEAR(box_dim(DyadicCellSet(1, 1.0, 10, {{37}}), 2, 10).slope, 0.0, 1e-12);
  const auto none = box_dim(DyadicCellSet(1, 1.0, 10), 2, 10);
  EXPECT_TRUE(none.degenerate);
  EXPECT_THROW(box_dim(DyadicCellSet::full(1, 1.0, 4), 3, 4), std::invalid_argument);
}

TEST(BoxDim, ProductsAddDimensions) {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = 6;
  const auto s = cantor_generate(spec);
  const auto lo = cantor_box_min_depth(spec, 1.0), hi = cantor_box_depth(spec, 1.0);
  EXPECT_NEAR(box_dim(product_with_interval(s, 1), lo, hi).slope, 1.5, 1e-12);
  EXPECT_NEAR(box_dim(product_with_point(s, 2), lo, hi).slope, 0.5, 1e-12);
}

TEST(BoxDim, MonotoneInTheRatio) {
  double previous = 0.0;
  for (double r : {0.1, 0.2, 0.3, 0.4}) {
    CantorSpec spec;
    spec.ratio = r;
    spec.depth = 4;
    const auto s = cantor_generate(spec);
    const auto est = box_dim(s, cantor_box_min_depth(spec, 1.0), cantor_box_depth(spec, 1.0));
    EXPECT_GT(est.slope, previous) << r;
    previous = est.slope;
  }
}

TEST(BoxDim, CsvHasOneRowPerDepth) {
  const auto est = box_dim(DyadicCellSet::full(1, 1.0, 5), 2, 5);
  std::ostringstream os;
  write_box_dim_csv(os, est);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("depth,count,log_inv_delta,log_count\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
