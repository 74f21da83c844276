#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dmdt/tradeoff.hpp"

namespace {

using dmdt::AntennaPair;
using dmdt::ExponentVector;

TEST(Dmt, CornerPoints) {
  EXPECT_DOUBLE_EQ(dmdt::dmt({2, 2}, 0.0), 4.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt({2, 2}, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt({2, 2}, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt({2, 2}, 1.5), 0.5);
  EXPECT_DOUBLE_EQ(dmdt::dmt({4, 1}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt({4, 1}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt({3, 3}, 7.0), 0.0);
}

TEST(Dmt, ConvexNonincreasingSymmetric) {
  for (int a = 1; a <= 4; ++a) {
    for (int b = 1; b <= 4; ++b) {
      const AntennaPair p{a, b};
      double prev = dmdt::dmt(p, 0.0);
      for (double r = 0.01; r <= 4.5; r += 0.01) {
        const double d = dmdt::dmt(p, r);
        EXPECT_LE(d, prev + 1e-12);
        EXPECT_DOUBLE_EQ(d, dmdt::dmt(p.swapped(), r));
        const double mid = dmdt::dmt(p, r - 0.005);
        EXPECT_LE(mid, 0.5 * (prev + d) + 1e-12);
        prev = d;
      }
      for (int k = 0; k <= std::min(a, b); ++k) {
        EXPECT_DOUBLE_EQ(dmdt::dmt(p, k), static_cast<double>((a - k) * (b - k)));
      }
    }
  }
}

TEST(Dmt, PowerControlScales) {
  EXPECT_DOUBLE_EQ(dmdt::dmt_with_power({2, 2}, 2.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(dmdt::dmt_with_power({2, 2}, 1.0, 1.0), dmdt::dmt({2, 2}, 1.0));
}

TEST(AntennaPair, RejectsOutOfRange) {
  EXPECT_THROW(AntennaPair(0, 2), std::invalid_argument);
  EXPECT_THROW(AntennaPair(2, 9), std::invalid_argument);
}

TEST(CapacityExponent, Examples) {
  EXPECT_NEAR(dmdt::capacity_exponent(ExponentVector({1.2, 0.3}, false)), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(dmdt::capacity_exponent(ExponentVector({0.0, 0.0})), 2.0);
  EXPECT_DOUBLE_EQ(dmdt::capacity_exponent(ExponentVector({0.5}), 2.0), 1.5);
  const auto g = dmdt::PowerControlExponent::schedule({1.0, 2.0});
  EXPECT_DOUBLE_EQ(dmdt::capacity_exponent(ExponentVector({0.5}), g, 2), 1.5);
  EXPECT_DOUBLE_EQ(dmdt::capacity_exponent(ExponentVector({0.5}), g, 1), 0.5);
}

TEST(CapacityExponent, SaturatedModeIsDeleted) {
  const double with = dmdt::capacity_exponent(ExponentVector({1.7, 0.2}));
  const double without = dmdt::capacity_exponent(ExponentVector({0.2}));
  EXPECT_DOUBLE_EQ(with, without);
}

TEST(ExponentVector, OrderingEnforced) {
  EXPECT_THROW(ExponentVector({0.1, 0.5}), std::invalid_argument);
  EXPECT_THROW(ExponentVector({-0.1}), std::invalid_argument);
  EXPECT_NO_THROW(ExponentVector({0.1, 0.5}, false));
}

TEST(PowerControl, RejectsBackoff) {
  EXPECT_THROW(dmdt::PowerControlExponent::constant(0.5), std::invalid_argument);
  EXPECT_TRUE(dmdt::PowerControlExponent().is_constant());
  EXPECT_FALSE(dmdt::PowerControlExponent::schedule({1.0, 2.0}).is_constant());
}

TEST(DecodingTime, Blockwise) {
  const std::vector<double> s{1.0, 0.5};
  EXPECT_EQ(dmdt::decoding_time_blockwise(s, 1.2), 2);
  const std::vector<double> one{1.0};
  EXPECT_EQ(dmdt::decoding_time_blockwise(one, 0.0), 1);
  const std::vector<double> weak{0.3, 0.3};
  EXPECT_FALSE(dmdt::decoding_time_blockwise(weak, 1.0).has_value());
}

TEST(DecodingTime, Continuous) {
  const std::vector<double> s{1.0, 0.5};
  EXPECT_NEAR(*dmdt::decoding_time_continuous(s, 1.2), 1.4, 1e-12);
  const std::vector<double> two{2.0};
  EXPECT_DOUBLE_EQ(*dmdt::decoding_time_continuous(two, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(*dmdt::decoding_time_continuous(two, 0.0), 0.0);
  const std::vector<double> weak{0.3, 0.3};
  EXPECT_FALSE(dmdt::decoding_time_continuous(weak, 1.0).has_value());
}

TEST(DecodingTime, BlockwiseIsCeilingOfContinuous) {
  const std::vector<std::vector<double>> seqs{
      {0.4, 0.7, 0.2, 1.1}, {2.0, 0.1}, {0.25, 0.25, 0.25, 0.25}, {0.9, 0.05, 3.0}};
  for (const auto& s : seqs) {
    for (double r = 0.05; r < 2.0; r += 0.05) {
      const auto c = dmdt::decoding_time_continuous(s, r);
      const auto b = dmdt::decoding_time_blockwise(s, r);
      ASSERT_EQ(c.has_value(), b.has_value());
      if (!c) continue;
      EXPECT_LE(*c, *b + 1e-12);
      if (std::abs(*c - std::round(*c)) > 1e-9) EXPECT_EQ(*b, static_cast<int>(std::ceil(*c)));
    }
  }
}

}  // namespace
