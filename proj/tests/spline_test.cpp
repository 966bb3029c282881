#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "keymotion/autodiff.hpp"
#include "keymotion/spline.hpp"

namespace keymotion {
namespace {

using P = Point3<double>;

std::vector<P> QuarterCircle(int count) {
  std::vector<P> pts;
  for (int i = 0; i < count; ++i) {
    const double a = std::numbers::pi / 2 * i / (count - 1);
    pts.push_back({std::cos(a), 0.0, std::sin(a)});
  }
  return pts;
}

double Dist(const P& a, const P& b) {
  return std::sqrt(ad::Square(a[0] - b[0]) + ad::Square(a[1] - b[1]) + ad::Square(a[2] - b[2]));
}

TEST(ArcLength, CollinearUnitSteps) {
  const std::vector<P> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_EQ(CumulativeArcLength(pts), (std::vector<double>{0, 1, 2}));
}

TEST(ArcLength, SinglePoint) {
  EXPECT_EQ(CumulativeArcLength(std::vector<P>{{3, 4, 5}}), std::vector<double>{0});
}

TEST(Spline, CollinearDataIsLinear) {
  const std::vector<P> pts{{0, 0, 0}, {0.3, 0.6, 0.9}, {1, 2, 3}, {1.1, 2.2, 3.3}};
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  for (int i = 0; i + 1 < static_cast<int>(pts.size()); ++i) {
    const double mid_s = 0.5 * (spline.knots[i] + spline.knots[i + 1]);
    const P mid = spline.Evaluate(mid_s);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(mid[k], 0.5 * (pts[i][k] + pts[i + 1][k]), 1e-9);
  }
}

TEST(Spline, TwoPointsInterpolateLinearly) {
  const std::vector<P> pts{{1, 1, 1}, {3, 1, 1}};
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  const P q = spline.Evaluate(0.5);
  EXPECT_NEAR(q[0], 1.5, 1e-15);
  EXPECT_NEAR(q[1], 1.0, 1e-15);
}

TEST(Spline, InterpolatesKnots) {
  const auto pts = QuarterCircle(7);
  const auto s = CumulativeArcLength(pts);
  const auto spline = FitSpline(pts, s);
  for (size_t i = 0; i < pts.size(); ++i) EXPECT_LT(Dist(spline.Evaluate(s[i]), pts[i]), 1e-12);
}

TEST(Spline, QuarterCircleLength) {
  const auto pts = QuarterCircle(20);
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  const double length = SplineCurveLength(spline, 10000);
  EXPECT_LT(std::abs(length - std::numbers::pi / 2) / (std::numbers::pi / 2), 0.01);
}

TEST(Spline, CoincidentPointsRejected) {
  const std::vector<P> pts{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  try {
    FitSpline(pts, CumulativeArcLength(pts));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "zero-length segment");
  }
}

TEST(Spline, RepeatedPointsAreMerged) {
  const std::vector<P> pts{{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  EXPECT_EQ(spline.interval_count(), 2);
  EXPECT_DOUBLE_EQ(spline.length, 2.0);
}

TEST(Resample, StraightSegment) {
  const std::vector<P> pts{{0, 0, 0}, {2, 0, 0}};
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  const auto three = ResampleUniform(spline, 3);
  ASSERT_EQ(three.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(three[k][0], k, 1e-15);
  const auto two = ResampleUniform(spline, 2);
  EXPECT_EQ(two[0], pts[0]);
  EXPECT_NEAR(two[1][0], 2.0, 1e-15);
}

TEST(Resample, QuarterCircleChordsAreUniform) {
  const auto pts = QuarterCircle(20);
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  const auto res = ResampleUniform(spline, 50);
  std::vector<double> chords;
  for (size_t i = 1; i < res.size(); ++i) chords.push_back(Dist(res[i], res[i - 1]));
  const auto [lo, hi] = std::minmax_element(chords.begin(), chords.end());
  double mean = 0.0;
  for (double c : chords) mean += c;
  mean /= static_cast<double>(chords.size());
  EXPECT_LT((*hi - *lo) / mean, 0.02);
}

TEST(Resample, ZeroLengthAndTooFewPointsRejected) {
  const std::vector<P> pts{{0, 0, 0}, {2, 0, 0}};
  const auto spline = FitSpline(pts, CumulativeArcLength(pts));
  EXPECT_THROW(ResampleUniform(spline, 1), std::invalid_argument);
  SplineSegment<double> flat = spline;
  flat.length = 0.0;
  EXPECT_THROW(ResampleUniform(flat, 5), std::invalid_argument);
}

TEST(Autodiff, ElementaryDerivatives) {
  ad::Tape tape;
  const ad::Var x = ad::Var::Variable(tape, 2.0);
  const ad::Var y = ad::Var::Variable(tape, -3.0);
  const ad::Var f = x * y + x / y - ad::sqrt(x * x + 5.0) + ad::abs(y) + ad::Square(ad::Hinge(x - 1.0));
  const Vector g = ad::Gradient(f, {x, y});
  EXPECT_NEAR(f.value(), -6.0 - 2.0 / 3.0 - 3.0 + 3.0 + 1.0, 1e-14);
  EXPECT_NEAR(g(0), -3.0 + 1.0 / -3.0 - 2.0 / 3.0 + 2.0, 1e-14);
  EXPECT_NEAR(g(1), 2.0 - 2.0 / 9.0 - 1.0, 1e-14);
  const ad::Var zero = ad::sqrt(ad::Var::Variable(tape, 0.0));
  EXPECT_EQ(ad::Gradient(zero, {}).size(), 0);
}

}  // namespace
}  // namespace keymotion
