#pragma once

/// \file asymptotic.hpp
/// High-SNR diversity-multiplexing-delay tradeoffs of fixed, FBL and VBL ARQ
/// over three-node and N-node half-duplex relay chains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dmdt/numerics.hpp"
#include "dmdt/tradeoff.hpp"
#include "dmdt/types.hpp"

namespace dmdt {

/// Which integer splits l1 + l2 = L - 1 an FBL evaluation enumerates.
/// PositiveOnly keeps both l_i >= 1. IncludeZero lets one l_i be 0 with
/// d(r/0) = d(inf) = 0, which keeps FBL below VBL at small r.
enum class FblSplitRange { PositiveOnly, IncludeZero };

struct AsymptoticOptions {
  double power_gain = 1.0;  // constant g(l) = g >= 1
  FblSplitRange fbl_range = FblSplitRange::PositiveOnly;
};

namespace detail {

inline void require_three_node(const Topology& t, const char* what) {
  if (t.nodes() != 3) {
    throw std::invalid_argument(std::string(what) + ": needs a 3-node topology, got " +
                                t.to_string());
  }
}

inline void check_rate(double r, const char* what) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument(std::string(what) + ": multiplexing gain must be finite and >= 0");
  }
}

inline void check_gain(double g) {
  if (!(g >= 1.0) || !std::isfinite(g)) {
    throw std::invalid_argument("power control gain must be finite and >= 1");
  }
}

// g·d(r/g) with the convention d(r/0) = 0 for an empty window.
inline double hop_dmt(const AntennaPair& p, double r, double rounds, double g) {
  if (rounds <= 0.0) return 0.0;
  return dmt_with_power(p, r / rounds, g);
}

// Exponent of P{hop still undecoded after x rounds} on a short-term static
// hop: n full rounds at exponent sum a and one partial round of length f at
// exponent sum b, with n·a + f·b <= r.
inline double short_term_stage_exponent(const AntennaPair& p, double r, double x, double g) {
  if (x <= 0.0) return 0.0;
  const double n = std::floor(x + 1e-12);
  const double f = std::max(0.0, x - n);
  if (f < 1e-12) return n * dmt_with_power(p, r / n, g);
  if (n == 0.0) return dmt_with_power(p, r / f, g);
  const double cap = g * p.min_dim();
  const double a_max = std::min(cap, r / n);
  auto cost = [&](double a) {
    const double b = std::max(0.0, (r - n * a) / f);
    return n * dmt_with_power(p, a, g) + dmt_with_power(p, b, g);
  };
  return numerics::minimize_interval(cost, {0.0, a_max}, 65, 3).second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fixed ARQ
// ---------------------------------------------------------------------------

/// Weakest-link DMDT of fixed windows (L1, L2). On a short-term static
/// channel each hop collects L_i-fold time diversity.
inline double fixed_dmdt_3node(const Topology& topology, int l1, int l2, double r,
                               ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                               const AsymptoticOptions& opts = {}) {
  detail::require_three_node(topology, "fixed_dmdt_3node");
  detail::check_rate(r, "fixed_dmdt_3node");
  detail::check_gain(opts.power_gain);
  if (l1 < 1 || l2 < 1) throw std::invalid_argument("fixed_dmdt_3node: windows must be >= 1");
  const double g = opts.power_gain;
  const double scale1 = channel == ChannelAssumption::ShortTermStatic ? l1 : 1.0;
  const double scale2 = channel == ChannelAssumption::ShortTermStatic ? l2 : 1.0;
  return std::min(scale1 * detail::hop_dmt(topology.hop(0), r, l1, g),
                  scale2 * detail::hop_dmt(topology.hop(1), r, l2, g));
}

struct FixedWindowsResult {
  int l1 = 0;
  int l2 = 0;
  double d = 0.0;
  double equalizing_split = 0.0;  // real L1 with L2 = L - L1
  bool equalized = false;         // false when no real split equalizes the hops
};

/// Best integer split with L1 + L2 <= L (ties: larger sum, then smaller L1),
/// plus the real split equalizing both hop DMTs.
inline FixedWindowsResult fixed_optimal_windows(
    const Topology& topology, int total, double r,
    ChannelAssumption channel = ChannelAssumption::LongTermStatic,
    const AsymptoticOptions& opts = {}) {
  detail::require_three_node(topology, "fixed_optimal_windows");
  if (total < 2) throw std::invalid_argument("fixed_optimal_windows: L must be >= 2");
  FixedWindowsResult best;
  best.d = -1.0;
  for (int a = 1; a < total; ++a) {
    for (int b = 1; a + b <= total; ++b) {
      const double d = fixed_dmdt_3node(topology, a, b, r, channel, opts);
      const bool better = d > best.d + 1e-12 ||
                          (std::abs(d - best.d) <= 1e-12 && a + b > best.l1 + best.l2);
      if (better) {
        best.l1 = a;
        best.l2 = b;
        best.d = d;
      }
    }
  }

  // d1(r/x) - d2(r/(L-x)) is nondecreasing in x.
  const double lt = static_cast<double>(total);
  const double g = opts.power_gain;
  auto gap = [&](double x) {
    return detail::hop_dmt(topology.hop(0), r, x, g) - detail::hop_dmt(topology.hop(1), r, lt - x, g);
  };
  const double eps = 1e-9 * lt;
  const double lo = eps;
  const double hi = lt - eps;
  if (gap(lo) > 0.0) {
    best.equalizing_split = 0.0;
  } else if (gap(hi) < 0.0) {
    best.equalizing_split = lt;
  } else {
    // Bracket the zero set [a, b] of the gap and take its midpoint.
    double a_lo = lo, a_hi = hi;
    double b_lo = lo, b_hi = hi;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a_lo + a_hi);
      (gap(m) >= 0.0 ? a_hi : a_lo) = m;
      const double n = 0.5 * (b_lo + b_hi);
      (gap(n) <= 0.0 ? b_lo : b_hi) = n;
    }
    best.equalizing_split = 0.5 * (a_hi + b_lo);
    best.equalized = true;
  }
  return best;
}

// ---------------------------------------------------------------------------
// FBL ARQ
// ---------------------------------------------------------------------------

inline double fbl_dmdt_3node(const Topology& topology, int total, double r,
                             ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                             const AsymptoticOptions& opts = {}) {
  detail::require_three_node(topology, "fbl_dmdt_3node");
  detail::check_rate(r, "fbl_dmdt_3node");
  detail::check_gain(opts.power_gain);
  const bool with_zero = opts.fbl_range == FblSplitRange::IncludeZero;
  const int min_total = with_zero ? 2 : 3;
  if (total < min_total) {
    throw std::invalid_argument("fbl_dmdt_3node: L must be >= " + std::to_string(min_total));
  }
  const double g = opts.power_gain;
  const bool short_term = channel == ChannelAssumption::ShortTermStatic;
  const int first = with_zero ? 0 : 1;
  double best = numerics::kInf;
  for (int l1 = first; l1 <= total - 1 - first; ++l1) {
    const int l2 = total - 1 - l1;
    const double d1 = detail::hop_dmt(topology.hop(0), r, l1, g);
    const double d2 = detail::hop_dmt(topology.hop(1), r, l2, g);
    best = std::min(best, short_term ? l1 * d1 + l2 * d2 : d1 + d2);
  }
  return best;
}

// ---------------------------------------------------------------------------
// VBL ARQ
// ---------------------------------------------------------------------------

struct VblSolution {
  double d = 0.0;
  bool zero_diversity = false;  // rate beyond the end-to-end capacity cap
  double s1 = 0.0;              // long-term: minimizing exponent sums
  double s2 = 0.0;
  double split = 0.0;           // short-term: minimizing first-hop time
};

/// Long-term: minimizes d1(s1) + d2(s2) on the boundary s1 s2/(s1+s2) = r/L.
/// Short-term: minimizes A1(τ) + A2(L−τ) over the hop-1 decoding time τ.
inline VblSolution vbl_dmdt_3node(const Topology& topology, int total, double r,
                                  ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                                  const AsymptoticOptions& opts = {}) {
  detail::require_three_node(topology, "vbl_dmdt_3node");
  detail::check_rate(r, "vbl_dmdt_3node");
  detail::check_gain(opts.power_gain);
  if (total < 1) throw std::invalid_argument("vbl_dmdt_3node: L must be >= 1");
  const double g = opts.power_gain;
  const AntennaPair h1 = topology.hop(0);
  const AntennaPair h2 = topology.hop(1);
  const double cap1 = g * h1.min_dim();
  const double cap2 = g * h2.min_dim();
  const double lt = static_cast<double>(total);
  VblSolution sol;

  if (channel == ChannelAssumption::LongTermStatic) {
    const double c = r / lt;
    if (c >= cap1 * cap2 / (cap1 + cap2)) {
      sol.zero_diversity = true;
      return sol;
    }
    auto s2_of = [&](double s1) { return s1 <= c ? cap2 : std::min(cap2, c * s1 / (s1 - c)); };
    auto objective = [&](double s1) {
      return dmt_with_power(h1, s1, g) + dmt_with_power(h2, s2_of(s1), g);
    };
    const auto [s1, v] = numerics::minimize_interval(objective, {c, cap1}, 512, 2);
    sol.d = v;
    sol.s1 = s1;
    sol.s2 = s2_of(s1);
    return sol;
  }

  const double c = r;
  auto objective = [&](double tau) {
    return detail::short_term_stage_exponent(h1, c, tau, g) +
           detail::short_term_stage_exponent(h2, c, lt - tau, g);
  };
  const auto [tau, v] =
      numerics::minimize_interval(objective, {0.0, lt}, static_cast<std::size_t>(64 * total + 1), 2);
  sol.d = v;
  sol.split = tau;
  sol.zero_diversity = v <= 0.0 && r > 0.0;
  return sol;
}

enum class ClosedFormCase { RelayBottleneck, SingleAntennaEnds, TwoByTwoByTwo };

/// Matches a topology to one of the closed-form families, if any.
inline std::optional<ClosedFormCase> closed_form_case(const Topology& t) {
  if (t.nodes() != 3) return std::nullopt;
  const auto& m = t.antennas();
  if (m[1] == 1) return ClosedFormCase::RelayBottleneck;
  if (m[0] == 1 && m[2] == 1) return ClosedFormCase::SingleAntennaEnds;
  if (m[0] == 2 && m[1] == 2 && m[2] == 2) return ClosedFormCase::TwoByTwoByTwo;
  return std::nullopt;
}

/// Exact long-term VBL DMDT for (M1,1,M3), (1,M,1) and (2,2,2).
inline double vbl_closed_form(const Topology& topology, int total, double r) {
  const auto kind = closed_form_case(topology);
  if (!kind) {
    throw std::invalid_argument("vbl_closed_form: no closed form for " + topology.to_string());
  }
  detail::check_rate(r, "vbl_closed_form");
  if (total < 1) throw std::invalid_argument("vbl_closed_form: L must be >= 1");
  const auto& m = topology.antennas();
  const double x = r / total;
  switch (*kind) {
    case ClosedFormCase::RelayBottleneck:
      return x <= 0.5 ? std::min(m[0], m[2]) * (1 - 2 * x) / (1 - x) : 0.0;
    case ClosedFormCase::SingleAntennaEnds:
      return x <= 0.5 ? m[1] * (1 - 2 * x) / (1 - x) : 0.0;
    case ClosedFormCase::TwoByTwoByTwo:
      if (x <= 0.5) return 2 * (4 - 5 * x) / (2 - x);
      if (x <= 2.0 / 3.0) return (3 - 4 * x) / (1 - x);
      if (x <= 1.0) return 4 * (1 - x) / (2 - x);
      return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// N-node networks
// ---------------------------------------------------------------------------

namespace detail {

inline void require_relay_chain(const Topology& t, const char* what) {
  if (t.nodes() < 3) {
    throw std::invalid_argument(std::string(what) + ": needs at least 3 nodes, got " +
                                t.to_string());
  }
}

}  // namespace detail

/// Minimum of the three-node VBL DMDT over every contiguous sub-network.
inline double nnode_vbl_dmdt(const Topology& topology, int total, double r,
                             ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                             const AsymptoticOptions& opts = {}) {
  detail::require_relay_chain(topology, "nnode_vbl_dmdt");
  double d = numerics::kInf;
  for (std::size_t i = 0; i + 2 < topology.nodes(); ++i) {
    d = std::min(d, vbl_dmdt_3node(topology.subnetwork(i), total, r, channel, opts).d);
  }
  return d;
}

struct DmdtBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Fixed ARQ on N nodes: weakest hop at the scaled rate (L_max/L)·r from
/// below, the VBL DMDT of the whole budget from above.
inline DmdtBounds nnode_fixed_bounds(const Topology& topology, const WindowAllocation& alloc,
                                     double r,
                                     ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                                     const AsymptoticOptions& opts = {}) {
  detail::require_relay_chain(topology, "nnode_fixed_bounds");
  detail::check_rate(r, "nnode_fixed_bounds");
  alloc.validate(topology);
  int l_max = 0;
  for (std::size_t i = 0; i + 1 < alloc.windows.size(); ++i) {
    l_max = std::max(l_max, alloc.windows[i] + alloc.windows[i + 1]);
  }
  const double scaled = r * l_max / alloc.total_budget;
  const double g = opts.power_gain;
  DmdtBounds b;
  b.lower = numerics::kInf;
  for (std::size_t i = 0; i < topology.hops(); ++i) {
    const int li = alloc.windows[i];
    const double scale = channel == ChannelAssumption::ShortTermStatic ? li : 1.0;
    b.lower = std::min(b.lower, scale * detail::hop_dmt(topology.hop(i), scaled, li, g));
  }
  b.upper = nnode_vbl_dmdt(topology, alloc.total_budget, r, channel, opts);
  b.lower = std::min(b.lower, b.upper);
  return b;
}

/// FBL on N nodes sits between the VBL DMDT at budget L − N and at L.
inline DmdtBounds nnode_fbl_bounds(const Topology& topology, int total, double r,
                                   ChannelAssumption channel = ChannelAssumption::LongTermStatic,
                                   const AsymptoticOptions& opts = {}) {
  detail::require_relay_chain(topology, "nnode_fbl_bounds");
  const int n = static_cast<int>(topology.nodes());
  if (total <= n) {
    throw std::invalid_argument("nnode_fbl_bounds: L must exceed the node count " +
                                std::to_string(n));
  }
  return {nnode_vbl_dmdt(topology, total - n, r, channel, opts),
          nnode_vbl_dmdt(topology, total, r, channel, opts)};
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

struct CurveSample {
  double r = 0.0;
  double d = 0.0;
  double lower = 0.0;  // equal to d unless only bounds are known
  double upper = 0.0;
  bool bounded = false;
  bool ok = true;
  std::string error;
};

struct DmdtCurve {
  ArqProtocol protocol;
  ChannelAssumption channel = ChannelAssumption::LongTermStatic;
  Topology topology;
  std::vector<CurveSample> samples;
};

/// One curve point for any protocol and topology size. Point-to-point links
/// reduce to d(r/L), or L·d(r/L) on a short-term static channel.
inline CurveSample evaluate_point(const ArqProtocol& protocol, const Topology& topology,
                                  ChannelAssumption channel, double r,
                                  const AsymptoticOptions& opts = {}) {
  CurveSample s;
  s.r = r;
  auto exact = [&s](double d) { s.d = s.lower = s.upper = d; };
  auto bounds = [&s](DmdtBounds b) {
    s.d = s.lower = b.lower;
    s.upper = b.upper;
    s.bounded = true;
  };
  const bool st = channel == ChannelAssumption::ShortTermStatic;

  if (topology.nodes() == 2) {
    const int l = protocol.kind == ProtocolKind::Fixed && !protocol.windows.empty()
                      ? protocol.windows.front()
                      : protocol.total_rounds;
    if (l < 1) throw std::invalid_argument("evaluate_point: window must be >= 1");
    detail::check_rate(r, "evaluate_point");
    exact((st ? l : 1.0) * detail::hop_dmt(topology.hop(0), r, l, opts.power_gain));
    return s;
  }

  switch (protocol.kind) {
    case ProtocolKind::Fixed:
      if (topology.nodes() == 3) {
        protocol.allocation().validate(topology);
        exact(fixed_dmdt_3node(topology, protocol.windows[0], protocol.windows[1], r, channel, opts));
      } else {
        bounds(nnode_fixed_bounds(topology, protocol.allocation(), r, channel, opts));
      }
      break;
    case ProtocolKind::Fbl:
      if (topology.nodes() == 3) {
        exact(fbl_dmdt_3node(topology, protocol.total_rounds, r, channel, opts));
      } else {
        bounds(nnode_fbl_bounds(topology, protocol.total_rounds, r, channel, opts));
      }
      break;
    case ProtocolKind::Vbl:
      exact(nnode_vbl_dmdt(topology, protocol.total_rounds, r, channel, opts));
      break;
  }
  return s;
}

/// Evaluates every grid point (optionally on `workers` threads) and returns
/// the samples in grid order. Point failures become flagged gaps.
inline DmdtCurve sweep_curve(const ArqProtocol& protocol, const Topology& topology,
                             ChannelAssumption channel, std::span<const double> r_grid,
                             const AsymptoticOptions& opts = {}, unsigned workers = 1) {
  if (r_grid.empty()) throw std::invalid_argument("sweep_curve: empty r grid");
  for (std::size_t i = 1; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > r_grid[i - 1])) {
      throw std::invalid_argument("sweep_curve: r grid must be strictly increasing");
    }
  }
  DmdtCurve curve{protocol, channel, topology, std::vector<CurveSample>(r_grid.size())};
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < r_grid.size(); i += stride) {
      try {
        curve.samples[i] = evaluate_point(protocol, topology, channel, r_grid[i], opts);
      } catch (const std::exception& e) {
        CurveSample gap;
        gap.r = r_grid[i];
        gap.d = gap.lower = gap.upper = std::numeric_limits<double>::quiet_NaN();
        gap.ok = false;
        gap.error = e.what();
        curve.samples[i] = gap;
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(r_grid.size())));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  return curve;
}

}  // namespace dmdt
