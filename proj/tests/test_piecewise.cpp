#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pwcheat/piecewise.hpp"

using namespace pwcheat;

TEST(Normalize, MergesEqualNeighbours) {
  const auto p = normalize({{0, 0.5, 1}, {2, 2}});
  EXPECT_EQ(p, PiecewiseFunction({0, 1}, {2}));
}

TEST(Normalize, ConstantIsUnchanged) {
  const PiecewiseFunction p({0, 1}, {3});
  EXPECT_EQ(normalize(p), p);
}

TEST(Normalize, DropsZeroWidthPieces) {
  const auto p = normalize({{0, 0.3, 0.3, 1}, {1, 5, 2}});
  EXPECT_EQ(p, PiecewiseFunction({0, 0.3, 1}, {1, 2}));
}

TEST(Normalize, RejectsMalformedBreakpoints) {
  EXPECT_THROW(PiecewiseFunction({0, 0.6, 0.4, 1}, {1, 2, 3}), ValidationError);
  EXPECT_THROW(PiecewiseFunction({0.1, 1}, {1}), ValidationError);
  EXPECT_THROW(PiecewiseFunction({0, 1.2}, {1}), ValidationError);
  EXPECT_THROW(PiecewiseFunction({0, 0.5, 1}, {1}), ValidationError);
  EXPECT_THROW(PiecewiseFunction({0, 1}, {}), ValidationError);
}

TEST(Eval, PieceMembershipAndRightLimit) {
  EXPECT_EQ(PiecewiseFunction({0, 1}, {2})(0.7), 2);
  EXPECT_EQ(PiecewiseFunction({0, 0.5, 1}, {1, 4})(0.5), 4);
  EXPECT_EQ(PiecewiseFunction({0, 0.25, 1}, {3, 0.5})(0.2), 3);
  EXPECT_EQ(PiecewiseFunction({0, 0.25, 1}, {3, 0.5})(1.0), 0.5);
  EXPECT_EQ(PiecewiseFunction({0, 0.25, 1}, {3, 0.5})(0.0), 3);
}

TEST(Eval, OutsideUnitIntervalIsDomainError) {
  const PiecewiseFunction p({0, 1}, {2});
  EXPECT_THROW(p(-0.1), DomainError);
  EXPECT_THROW(p(1.5), DomainError);
}

TEST(Subtract, Examples) {
  const PiecewiseFunction a({0, 0.3, 1}, {1, 2});
  EXPECT_EQ(subtract(a, a), PiecewiseFunction({0, 1}, {0}));
  EXPECT_EQ(subtract(PiecewiseFunction({0, 1}, {3}), PiecewiseFunction({0, 0.5, 1}, {1, 2})),
            PiecewiseFunction({0, 0.5, 1}, {2, 1}));
  EXPECT_EQ(subtract(a, PiecewiseFunction({0, 0.6, 1}, {1, 2})), PiecewiseFunction({0, 0.3, 0.6, 1}, {0, 1, 0}));
}

TEST(Distance, Examples) {
  const PiecewiseFunction a({0, 0.5, 1}, {1, 1});
  EXPECT_EQ(distance(a, a, Norm::L1), 0.0);
  EXPECT_DOUBLE_EQ(distance(PiecewiseFunction({0, 1}, {1}), PiecewiseFunction({0, 1}, {3}), Norm::L1), 2.0);
  EXPECT_DOUBLE_EQ(distance(a, PiecewiseFunction({0, 0.5, 1}, {1, 2}), Norm::L1), 0.5);
  EXPECT_DOUBLE_EQ(distance(a, PiecewiseFunction({0, 0.5, 1}, {1, 2}), Norm::Linf), 1.0);
}

TEST(ConductivityProfile, EnforcesBounds) {
  EXPECT_THROW(ConductivityProfile({0, 1}, {5}, 0.1, 2), ValidationError);
  EXPECT_THROW(ConductivityProfile({0, 1}, {1}, 0.0, 2), ValidationError);
  EXPECT_THROW(ConductivityProfile({0, 1}, {1}, 3.0, 2), ValidationError);
  const ConductivityProfile merged({0, 0.5, 1}, {2, 2});
  EXPECT_EQ(merged.pieces(), 1u);
  EXPECT_DOUBLE_EQ(ConductivityProfile({0, 0.5, 1}, {1, 4}).thermal_resistance(), 0.5 + 0.125);
}

TEST(PiecewiseProperties, SubtractIsPointwiseAwayFromBreakpoints) {
  NormalStream rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p1 = oracle::random_profile(rng, 5, 0.1, 10);
    const auto p2 = oracle::random_profile(rng, 5, 0.1, 10);
    const auto d = subtract(p1, p2);
    for (int i = 0; i < 50; ++i) {
      const double x = rng.uniform() * 0.999;
      EXPECT_EQ(d(x), p1(x) - p2(x));
    }
  }
}

TEST(PiecewiseProperties, NormalizeIsIdempotent) {
  NormalStream rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = oracle::random_profile(rng, 6, 0.5, 2);
    // Duplicate some values so merging has work to do.
    std::vector<double> vs = p.values();
    for (std::size_t j = 1; j < vs.size(); ++j)
      if (rng.uniform() < 0.4) vs[j] = vs[j - 1];
    const PiecewiseFunction q(p.breakpoints(), vs);
    const auto once = normalize(q);
    EXPECT_EQ(normalize(once), once);
    EXPECT_TRUE(once.strictly_increasing());
  }
}

TEST(PiecewiseProperties, DistanceIsAMetric) {
  NormalStream rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = normalize(oracle::random_profile(rng, 4, 0.5, 2));
    const auto b = normalize(oracle::random_profile(rng, 4, 0.5, 2));
    const auto c = normalize(oracle::random_profile(rng, 4, 0.5, 2));
    for (Norm norm : {Norm::L1, Norm::Linf}) {
      EXPECT_EQ(distance(a, a, norm), 0.0);
      EXPECT_GT(distance(a, b, norm), 0.0);
      EXPECT_DOUBLE_EQ(distance(a, b, norm), distance(b, a, norm));
      EXPECT_LE(distance(a, c, norm), distance(a, b, norm) + distance(b, c, norm) + 1e-14);
    }
  }
}
