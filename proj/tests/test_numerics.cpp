#include <gtest/gtest.h>

#include <cmath>
#include <span>

#include "dmdt/numerics.hpp"

namespace {

using dmdt::numerics::BoxDomain;
using dmdt::numerics::Interval;
using dmdt::numerics::kInf;

// Independent oracle: γ(m,x) = (m−1)·γ(m−1,x) − x^{m−1}e^{−x}, γ(1,x) = 1 − e^{−x}.
double gamma_by_recurrence(int m, double x) {
  double g = 1.0 - std::exp(-x);
  for (int k = 2; k <= m; ++k) g = (k - 1) * g - std::pow(x, k - 1) * std::exp(-x);
  return g;
}

TEST(IncompleteGamma, ClosedFormsAtSmallShape) {
  EXPECT_NEAR(dmdt::numerics::lower_incomplete_gamma(1, 1.0), 1.0 - std::exp(-1.0), 1e-14);
  EXPECT_NEAR(dmdt::numerics::lower_incomplete_gamma(2, 1.0), 1.0 - 2.0 * std::exp(-1.0), 1e-14);
}

TEST(IncompleteGamma, SaturatesAtFactorial) {
  EXPECT_NEAR(dmdt::numerics::lower_incomplete_gamma(3, 50.0), 2.0, 1e-9);
  EXPECT_EQ(dmdt::numerics::regularized_lower_gamma(4, kInf), 1.0);
}

TEST(IncompleteGamma, MatchesRecurrenceWhereItIsStable) {
  for (int m = 1; m <= 12; ++m) {
    for (double x : {0.5, 1.0, 2.5, 5.0, 9.0, 15.0, 30.0}) {
      const double oracle = gamma_by_recurrence(m, x);
      const double got = dmdt::numerics::lower_incomplete_gamma(m, x);
      // The recurrence itself loses about (m-1)! ulps.
      const double tol = std::max(1e-13, 1e-15 * dmdt::numerics::factorial(m - 1));
      EXPECT_NEAR(got, oracle, tol * std::max(1.0, oracle)) << "m=" << m << " x=" << x;
    }
  }
}

TEST(IncompleteGamma, HighPrecisionReferenceValues) {
  // P(m,x) evaluated at 40 digits.
  struct Ref {
    int m;
    double x;
    double p;
  };
  const Ref refs[] = {
      {1, 0.001, 0.00099950016662500835},  {3, 0.02, 1.3134924482406744e-6},
      {4, 2.0, 0.14287653950145295},       {8, 1.0, 1.0249196674641695e-5},
      {8, 20.0, 0.99922140991749264},      {12, 1.0, 8.3161074268823339e-10},
      {16, 3.5, 9.1838586324022225e-7},    {16, 40.0, 0.9999945360192887},
      {9, 0.002, 1.4083973691204203e-30},
  };
  for (const auto& r : refs) {
    EXPECT_NEAR(dmdt::numerics::regularized_lower_gamma(r.m, r.x) / r.p, 1.0, 1e-12)
        << "m=" << r.m << " x=" << r.x;
  }
}

TEST(IncompleteGamma, SmallArgumentKeepsRelativeAccuracy) {
  // Leading term x^m/m! dominates; the recurrence would cancel to noise here.
  const double x = 1e-4;
  const double p = dmdt::numerics::regularized_lower_gamma(4, x);
  EXPECT_NEAR(p / (std::pow(x, 4) / 24.0), 1.0, 1e-3);
}

TEST(IncompleteGamma, RegularizedIsMonotoneAndBounded) {
  for (int m : {1, 3, 6, 16}) {
    double prev = 0.0;
    for (double x = 0.01; x < 60.0; x *= 1.3) {
      const double p = dmdt::numerics::regularized_lower_gamma(m, x);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(IncompleteGamma, RejectsBadArguments) {
  EXPECT_THROW(dmdt::numerics::lower_incomplete_gamma(0, 1.0), std::invalid_argument);
  EXPECT_THROW(dmdt::numerics::lower_incomplete_gamma(2, -0.1), std::invalid_argument);
}

TEST(Integrate, AnalyticCases) {
  EXPECT_NEAR(dmdt::numerics::integrate([](double t) { return std::exp(-t); },
                                        Interval{0.0, kInf}, 1e-8),
              1.0, 1e-8);
  EXPECT_NEAR(dmdt::numerics::integrate([](double t) { return t; }, Interval{0.0, 1.0}, 1e-10),
              0.5, 1e-10);
  EXPECT_NEAR(dmdt::numerics::integrate([](double t) { return std::cos(t); },
                                        Interval{0.0, 3.0}, 1e-10),
              std::sin(3.0), 1e-10);
}

TEST(Integrate, KinkedIntegrand) {
  const double v = dmdt::numerics::integrate([](double t) { return std::abs(t - 0.3); },
                                             Interval{0.0, 1.0}, 1e-10);
  EXPECT_NEAR(v, 0.5 * 0.09 + 0.5 * 0.49, 1e-10);
}

TEST(Integrate, IsLinear) {
  auto f = [](double t) { return std::exp(-t) * std::sin(3 * t); };
  auto g = [](double t) { return 1.0 / (1.0 + t * t); };
  const Interval dom{0.0, 5.0};
  const double tol = 1e-9;
  const double lhs = dmdt::numerics::integrate([&](double t) { return 2.0 * f(t) - 3.0 * g(t); },
                                               dom, tol);
  const double rhs = 2.0 * dmdt::numerics::integrate(f, dom, tol) -
                     3.0 * dmdt::numerics::integrate(g, dom, tol);
  EXPECT_NEAR(lhs, rhs, 2 * tol * 5.0);
}

TEST(Integrate, FailsLoudlyOnBudgetExhaustion) {
  auto wild = [](double t) { return std::sin(1.0 / (t + 1e-12)); };
  dmdt::numerics::QuadratureOptions opts;
  opts.max_subintervals = 20;
  EXPECT_THROW(dmdt::numerics::integrate(wild, Interval{0.0, 1.0}, 1e-12, opts),
               dmdt::NumericError);
}

TEST(Integrate, RejectsInvalidDomain) {
  EXPECT_THROW(dmdt::numerics::integrate([](double) { return 1.0; }, Interval{1.0, 0.0}, 1e-6),
               std::invalid_argument);
}

TEST(MinimizeBox, QuadraticInOneDimension) {
  const auto [x, v] =
      dmdt::numerics::minimize_interval([](double t) { return t * t; }, {-1.0, 1.0}, 101, 3);
  EXPECT_LE(v, 1e-6);
  EXPECT_NEAR(x, 0.0, 1e-3);
}

TEST(MinimizeBox, LinearObjectiveHitsCorner) {
  const BoxDomain box({{0.0, 1.0}, {0.0, 1.0}});
  const auto res = dmdt::numerics::minimize_box(
      [](std::span<const double> p) { return p[0] + p[1]; }, box, 11, 0);
  EXPECT_EQ(res.value, 0.0);
  EXPECT_EQ(res.point[0], 0.0);
  EXPECT_EQ(res.point[1], 0.0);
}

TEST(MinimizeBox, NeverBelowInfimumAndImprovesWithResolution) {
  auto f = [](std::span<const double> p) {
    return std::pow(p[0] - 0.3137, 2) + std::abs(p[1] + 0.271) + 1.0;
  };
  const BoxDomain box({{-1.0, 1.0}, {-1.0, 1.0}});
  double prev = kInf;
  for (std::size_t grid : {5u, 9u, 17u, 33u, 65u}) {
    const auto res = dmdt::numerics::minimize_box(f, box, grid, 0);
    EXPECT_GE(res.value, 1.0);
    EXPECT_LE(res.value, prev);
    prev = res.value;
  }
}

TEST(MinimizeBox, RejectsEmptyDomain) {
  EXPECT_THROW(BoxDomain({{1.0, 0.0}}), std::invalid_argument);
  EXPECT_THROW(BoxDomain({}), std::invalid_argument);
}

}  // namespace
