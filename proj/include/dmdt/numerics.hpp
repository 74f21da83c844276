#pragma once

/// \file numerics.hpp
/// Numerical kernels shared by the analytic modules: the lower incomplete
/// gamma function for integer shape, adaptive Gauss-Kronrod quadrature and a
/// deterministic grid-refinement minimizer over boxes.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmdt/error.hpp"

namespace dmdt::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool valid() const {
    return !std::isnan(lo) && !std::isnan(hi) && std::isfinite(lo) && lo <= hi;
  }
  [[nodiscard]] bool half_open() const { return hi == kInf; }
  [[nodiscard]] double width() const { return hi - lo; }
};

/// Axis-aligned box; one Interval per dimension.
class BoxDomain {
 public:
  static constexpr std::size_t kMaxDimension = 8;

  explicit BoxDomain(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    if (bounds_.empty() || bounds_.size() > kMaxDimension) {
      throw std::invalid_argument("BoxDomain: dimension must be in [1, " +
                                  std::to_string(kMaxDimension) + "]");
    }
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      const auto& b = bounds_[i];
      if (!b.valid() || b.half_open()) {
        throw std::invalid_argument("BoxDomain: empty or unbounded interval in dimension " +
                                    std::to_string(i));
      }
    }
  }

  [[nodiscard]] std::size_t dimension() const { return bounds_.size(); }
  [[nodiscard]] const Interval& operator[](std::size_t i) const { return bounds_[i]; }
  [[nodiscard]] std::span<const Interval> bounds() const { return bounds_; }

 private:
  std::vector<Interval> bounds_;
};

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

namespace detail {

// x^m e^{-x} / m! * sum_k x^k / ((m+1)...(m+k)), computed in log space for the prefactor.
inline double regularized_lower_series(int m, double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 1000; ++k) {
    term *= x / (m + k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  const double log_pref = m * std::log(x) - x - std::lgamma(m + 1.0);
  return std::exp(log_pref) * sum;
}

// Q(m,x) = e^{-x} sum_{k<m} x^k/k!, exact for integer m.
inline double regularized_upper_poisson(int m, double x) {
  double term = std::exp(-x);
  double sum = term;
  for (int k = 1; k < m; ++k) {
    term *= x / k;
    sum += term;
  }
  return sum;
}

}  // namespace detail

/// P(m,x) = γ(m,x)/Γ(m) for integer m ≥ 1 and x ≥ 0 (x = +inf gives 1).
inline double regularized_lower_gamma(int m, double x) {
  if (m < 1) throw std::invalid_argument("incomplete gamma: shape must be >= 1");
  if (!(x >= 0.0)) throw std::invalid_argument("incomplete gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x == kInf) return 1.0;
  if (x < m + 1.0) return std::min(1.0, detail::regularized_lower_series(m, x));
  return std::clamp(1.0 - detail::regularized_upper_poisson(m, x), 0.0, 1.0);
}

/// γ(m,x) = ∫₀ˣ t^{m−1} e^{−t} dt for integer m ≥ 1.
inline double lower_incomplete_gamma(int m, double x) {
  return regularized_lower_gamma(m, x) * factorial(m - 1);
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadratureOptions {
  std::size_t max_subintervals = 4000;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename F>
Segment gauss_kronrod_15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

namespace detail {

template <typename F>
double integrate_finite(const F& f, double lo, double hi, double tol, QuadratureOptions opts) {
  std::priority_queue<Segment> heap;
  auto first = gauss_kronrod_15(f, lo, hi);
  double total = first.value;
  double error = first.error;
  heap.push(first);
  std::size_t count = 1;
  while (error > tol) {
    if (count >= opts.max_subintervals) {
      throw NumericError("integrate: no convergence on [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "], error estimate " +
                         std::to_string(error));
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = gauss_kronrod_15(f, worst.a, mid);
    const auto right = gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
    if (!std::isfinite(total)) throw NumericError("integrate: non-finite integrand");
  }
  // Re-sum to shed the drift of the running updates.
  double resum = 0.0;
  while (!heap.empty()) {
    resum += heap.top().value;
    heap.pop();
  }
  return resum;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over `domain` to absolute
/// tolerance `tol`. An infinite upper limit is mapped onto [0,1) via
/// t = lo + u/(1-u). Throws NumericError when the subdivision budget runs out.
template <typename F>
  requires std::invocable<const F&, double>
double integrate(const F& f, Interval domain, double tol, QuadratureOptions opts = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate: tolerance must be positive");
  if (std::isnan(domain.lo) || std::isnan(domain.hi) || !std::isfinite(domain.lo) ||
      domain.lo > domain.hi) {
    throw std::invalid_argument("integrate: invalid interval");
  }
  if (domain.lo == domain.hi) return 0.0;

  if (domain.half_open()) {
    const double lo = domain.lo;
    auto mapped = [&f, lo](double u) {
      const double one_minus = 1.0 - u;
      const double t = lo + u / one_minus;
      const double v = f(t) / (one_minus * one_minus);
      return std::isfinite(v) ? v : 0.0;
    };
    return detail::integrate_finite(mapped, 0.0, 1.0, tol, opts);
  }
  return detail::integrate_finite(f, domain.lo, domain.hi, tol, opts);
}

// ---------------------------------------------------------------------------
// Box minimization
// ---------------------------------------------------------------------------

struct BoxMinimum {
  std::vector<double> point;
  double value = kInf;
};

/// Deterministic grid search on `domain` with `coarse_grid` points per
/// dimension (endpoints included), followed by `refine_rounds` rounds that
/// re-grid one coarse cell around the incumbent. Only feasible points are
/// evaluated, so the result is an upper bound on the infimum.
template <typename F>
  requires std::invocable<const F&, std::span<const double>>
BoxMinimum minimize_box(const F& f, const BoxDomain& domain, std::size_t coarse_grid,
                        std::size_t refine_rounds) {
  if (coarse_grid < 1) throw std::invalid_argument("minimize_box: grid must be positive");
  const std::size_t dim = domain.dimension();
  double points = 1.0;
  for (std::size_t i = 0; i < dim; ++i) points *= static_cast<double>(coarse_grid);
  if (points > 2e7) throw std::invalid_argument("minimize_box: grid too large");

  std::vector<Interval> box(domain.bounds().begin(), domain.bounds().end());
  BoxMinimum best;
  std::vector<double> x(dim);
  std::vector<std::size_t> idx(dim);

  auto coord = [&](std::size_t d, std::size_t i) {
    if (coarse_grid == 1) return 0.5 * (box[d].lo + box[d].hi);
    const double t = static_cast<double>(i) / static_cast<double>(coarse_grid - 1);
    return i + 1 == coarse_grid ? box[d].hi : box[d].lo + t * box[d].width();
  };

  for (std::size_t round = 0; round <= refine_rounds; ++round) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (std::size_t d = 0; d < dim; ++d) x[d] = coord(d, idx[d]);
      const double v = f(std::span<const double>(x));
      if (v < best.value) {
        best.value = v;
        best.point = x;
      }
      std::size_t d = 0;
      while (d < dim && ++idx[d] == coarse_grid) idx[d++] = 0;
      if (d == dim) break;
    }
    if (best.point.empty()) throw NumericError("minimize_box: objective never finite");
    for (std::size_t d = 0; d < dim; ++d) {
      const double cell = coarse_grid > 1 ? box[d].width() / static_cast<double>(coarse_grid - 1)
                                          : box[d].width() * 0.5;
      box[d].lo = std::max(domain[d].lo, best.point[d] - cell);
      box[d].hi = std::min(domain[d].hi, best.point[d] + cell);
    }
  }
  return best;
}

/// One-dimensional convenience wrapper over minimize_box.
template <typename F>
  requires std::invocable<const F&, double>
std::pair<double, double> minimize_interval(const F& f, Interval domain, std::size_t coarse_grid,
                                            std::size_t refine_rounds) {
  const BoxDomain box({domain});
  auto res = minimize_box([&f](std::span<const double> p) { return f(p[0]); }, box, coarse_grid,
                          refine_rounds);
  return {res.point[0], res.value};
}

}  // namespace dmdt::numerics
