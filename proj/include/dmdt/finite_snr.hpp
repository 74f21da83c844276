#pragma once

/// \file finite_snr.hpp
/// Finite-SNR message error of fixed ARQ: per-hop outage (general MIMO and
/// OSTBC), service-time law, queueing deadline violation and the window
/// allocator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dmdt/error.hpp"
#include "dmdt/numerics.hpp"
#include "dmdt/tradeoff.hpp"
#include "dmdt/types.hpp"

namespace dmdt {

struct FiniteSnrScenario {
  double rho = 1.0;     // linear SNR
  double r = 1.0;       // multiplexing gain, normalized by log2(1 + M_rx ρ)
  double r_s = 1.0;     // spatial code rate
  double lambda = 1.0;  // mean inter-arrival time, blocks
  double k = 1.0;       // end-to-end deadline, blocks

  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("scenario: rho must be > 0");
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("scenario: r must be >= 0");
    if (!(r_s > 0.0 && r_s <= 1.0)) throw std::invalid_argument("scenario: r_s must be in (0, 1]");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("scenario: lambda must be > 0");
    }
    if (!(k >= 1.0) || !std::isfinite(k)) throw std::invalid_argument("scenario: k must be >= 1");
  }
};

/// Base of the rate normalization in the outage threshold.
enum class ThresholdVariant {
  ReceiveScaled,  // 1 + M_rx ρ
  Unscaled,       // 1 + ρ
};

enum class OutageModel { Ostbc, GeneralMimo };

struct FiniteSnrOptions {
  ThresholdVariant threshold = ThresholdVariant::ReceiveScaled;
  OutageModel outage = OutageModel::Ostbc;
  bool clamp_min_one = true;
  double quad_tol = 1e-10;
  double stability_margin = 1e-9;
  unsigned workers = 1;
};

/// r = R / log2(1 + M_rx ρ).
inline double finite_multiplexing(double rate_bits, int m_rx, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("finite_multiplexing: rho must be > 0");
  check_antennas(m_rx, "finite_multiplexing");
  return rate_bits / std::log2(1.0 + m_rx * rho);
}

namespace detail {

inline double threshold_base(const AntennaPair& p, double rho, ThresholdVariant v) {
  return 1.0 + (v == ThresholdVariant::ReceiveScaled ? p.m_rx * rho : rho);
}

// (M_tx/ρ)·B^{lo}·(B^{hi-lo} − 1), saturating to +inf.
inline double threshold_increment(const AntennaPair& p, double rho, double log_base, double lo,
                                  double hi) {
  const double a = lo * log_base;
  const double b = std::max(0.0, hi - lo) * log_base;
  if (a + std::log(std::max(b, 1e-300)) > 700.0) return numerics::kInf;
  return p.m_tx / rho * std::exp(a) * std::expm1(b);
}

// Coarse grid per free dimension keeping the sup search near 2e5 points.
inline std::size_t sup_grid(std::size_t dim) {
  constexpr std::size_t table[] = {1, 257, 65, 33, 17, 11, 7, 5};
  return table[std::min<std::size_t>(dim, 7)];
}

}  // namespace detail

/// Outage of one hop after `rounds` rounds for a general MIMO code: sup over
/// ordered exponent splits (b_1 < ... < b_{M*}) summing to r/rounds of the
/// product of regularized incomplete gamma factors. M* = 1 is closed form.
inline double per_hop_outage(const AntennaPair& pair, double rounds,
                             const FiniteSnrScenario& scenario,
                             ThresholdVariant variant = ThresholdVariant::ReceiveScaled) {
  if (!(rounds > 0.0)) throw std::invalid_argument("per_hop_outage: rounds must be > 0");
  if (scenario.r == 0.0) return 0.0;
  const double total = scenario.r / rounds;
  const double log_base = std::log(detail::threshold_base(pair, scenario.rho, variant));
  const int m = pair.min_dim();
  const int offset = std::abs(pair.m_tx - pair.m_rx);

  auto product = [&](std::span<const double> b) {
    double p = 1.0;
    double prev = 0.0;
    for (int l = 1; l <= m; ++l) {
      const double x = detail::threshold_increment(pair, scenario.rho, log_base, prev,
                                                   b[static_cast<std::size_t>(l - 1)]);
      p *= numerics::regularized_lower_gamma(offset + 2 * l - 1, x);
      prev = b[static_cast<std::size_t>(l - 1)];
    }
    return p;
  };

  if (m == 1) {
    const double b[] = {total};
    return product(b);
  }

  // u ∈ [0,1]^{m-1}: b_l = b_{l-1} + u_l·(cap_l − b_{l-1}),
  // cap_l = (total − Σ_{j<l} b_j)/(m − l + 1), b_m the remainder.
  const auto dim = static_cast<std::size_t>(m - 1);
  auto to_b = [&](std::span<const double> u, std::vector<double>& b) {
    double sum = 0.0;
    double prev = 0.0;
    for (std::size_t l = 0; l < dim; ++l) {
      const double cap = (total - sum) / static_cast<double>(m - static_cast<int>(l));
      b[l] = prev + u[l] * (cap - prev);
      sum += b[l];
      prev = b[l];
    }
    b[dim] = total - sum;
  };
  std::vector<numerics::Interval> box(dim, numerics::Interval{0.0, 1.0});
  auto objective = [&](std::span<const double> u) {
    thread_local std::vector<double> b;
    b.assign(static_cast<std::size_t>(m), 0.0);
    to_b(u, b);
    return -product(b);
  };
  const auto best = numerics::minimize_box(objective, numerics::BoxDomain(box),
                                           detail::sup_grid(dim), 2);
  return std::clamp(-best.value, 0.0, 1.0);
}

/// Outage of one OSTBC hop: P{‖H‖_F² < threshold}, ‖H‖_F² ~ Gamma(M_tx M_rx, 1).
inline double ostbc_hop_outage(const AntennaPair& pair, double rounds,
                               const FiniteSnrScenario& scenario,
                               ThresholdVariant variant = ThresholdVariant::ReceiveScaled) {
  if (!(rounds > 0.0)) throw std::invalid_argument("ostbc_hop_outage: rounds must be > 0");
  if (scenario.r == 0.0) return 0.0;
  const double log_base = std::log(detail::threshold_base(pair, scenario.rho, variant));
  const double x = detail::threshold_increment(pair, scenario.rho, log_base, 0.0,
                                               scenario.r / (scenario.r_s * rounds));
  return numerics::regularized_lower_gamma(pair.m_tx * pair.m_rx, x);
}

inline double hop_outage(const AntennaPair& pair, double rounds, const FiniteSnrScenario& scenario,
                         const FiniteSnrOptions& opts) {
  return opts.outage == OutageModel::Ostbc ? ostbc_hop_outage(pair, rounds, scenario, opts.threshold)
                                           : per_hop_outage(pair, rounds, scenario, opts.threshold);
}

struct OutageReport {
  std::vector<double> per_hop;
  double union_sum = 0.0;  // Σ p_i, unclamped
  double exact = 0.0;      // 1 − Π(1 − p_i)
};

inline OutageReport combine_outages(std::vector<double> per_hop) {
  OutageReport rep;
  double survive = 1.0;
  for (double p : per_hop) {
    rep.union_sum += p;
    survive *= 1.0 - p;
  }
  rep.exact = 1.0 - survive;
  rep.per_hop = std::move(per_hop);
  return rep;
}

inline OutageReport ostbc_outage(const Topology& topology, const WindowAllocation& alloc,
                                 const FiniteSnrScenario& scenario,
                                 ThresholdVariant variant = ThresholdVariant::ReceiveScaled) {
  alloc.validate(topology);
  scenario.validate();
  std::vector<double> per_hop;
  for (std::size_t i = 0; i < topology.hops(); ++i) {
    per_hop.push_back(ostbc_hop_outage(topology.hop(i), alloc.windows[i], scenario, variant));
  }
  return combine_outages(std::move(per_hop));
}

// ---------------------------------------------------------------------------
// Service time
// ---------------------------------------------------------------------------

enum class DensityPath { OstbcClosedForm, NumericDifferentiation };

/// Law of the continuous decoding time t of one hop: cdf(t) = 1 − P_out(t).
class ServiceTimeDistribution {
 public:
  ServiceTimeDistribution(AntennaPair pair, FiniteSnrScenario scenario, FiniteSnrOptions opts)
      : pair_(pair), scenario_(scenario), opts_(opts) {
    scenario_.validate();
  }

  [[nodiscard]] DensityPath path() const {
    return opts_.outage == OutageModel::Ostbc ? DensityPath::OstbcClosedForm
                                              : DensityPath::NumericDifferentiation;
  }

  [[nodiscard]] double outage(double t) const {
    if (t <= 0.0) return scenario_.r > 0.0 ? 1.0 : 0.0;
    return hop_outage(pair_, t, scenario_, opts_);
  }

  [[nodiscard]] double cdf(double t) const { return 1.0 - outage(t); }

  [[nodiscard]] double pdf(double t) const {
    if (t <= 0.0 || scenario_.r == 0.0) return 0.0;
    if (path() == DensityPath::NumericDifferentiation) {
      const double h = 1e-4 * t;
      return std::max(0.0, (cdf(t + h) - cdf(t - h)) / (2.0 * h));
    }
    // d/dt P(m, f(t)) with f = (M_tx/ρ)(B^{r/(r_s t)} − 1).
    const int m = pair_.m_tx * pair_.m_rx;
    const double log_base =
        std::log(detail::threshold_base(pair_, scenario_.rho, opts_.threshold));
    const double e = scenario_.r / (scenario_.r_s * t);
    if (e * log_base > 700.0) return 0.0;
    const double grow = std::exp(e * log_base);
    const double f = pair_.m_tx / scenario_.rho * std::expm1(e * log_base);
    if (f == 0.0) return 0.0;
    const double log_density = (m - 1) * std::log(f) - f - std::lgamma(static_cast<double>(m));
    const double df = pair_.m_tx / scenario_.rho * grow * log_base * scenario_.r /
                      (scenario_.r_s * t * t);
    return std::exp(log_density) * df;
  }

 private:
  AntennaPair pair_;
  FiniteSnrScenario scenario_;
  FiniteSnrOptions opts_;
};

inline ServiceTimeDistribution service_time_distribution(const AntennaPair& pair,
                                                         const FiniteSnrScenario& scenario,
                                                         const FiniteSnrOptions& opts = {}) {
  return {pair, scenario, opts};
}

/// μ(L) = ∫₁^L t·pdf + L·P{t > L}; with clamping, mass below one block
/// counts as one block. The general-MIMO path integrates P_out by parts.
inline double mean_service_time(const AntennaPair& pair, int window,
                                const FiniteSnrScenario& scenario,
                                const FiniteSnrOptions& opts = {}) {
  if (window < 1) throw std::invalid_argument("mean_service_time: window must be >= 1");
  const auto law = service_time_distribution(pair, scenario, opts);
  const double l = window;
  const double head = opts.clamp_min_one ? law.cdf(1.0) : 0.0;
  if (window == 1) return head + law.outage(1.0);
  if (law.path() == DensityPath::OstbcClosedForm) {
    const double body = numerics::integrate([&](double t) { return t * law.pdf(t); },
                                            numerics::Interval{1.0, l}, opts.quad_tol);
    return head + body + l * law.outage(l);
  }
  const double tail = numerics::integrate([&](double t) { return law.outage(t); },
                                          numerics::Interval{1.0, l}, 1e-7);
  return head + 1.0 - law.cdf(1.0) + tail;
}

// ---------------------------------------------------------------------------
// Deadline violation
// ---------------------------------------------------------------------------

struct DeadlineResult {
  double probability = 0.0;
  std::vector<double> theta;  // per three-node stage (one entry for N = 2)
  double theta_star = 0.0;
};

/// P{D > k} from per-hop mean service times: exact M/M/1 form for two or
/// three nodes, e^{−kθ*} beyond. Throws UnstableQueueError if any θ_i <= margin.
inline DeadlineResult deadline_probability(std::span<const double> mu, double lambda, double k,
                                           double margin = 1e-9) {
  if (mu.empty()) throw std::invalid_argument("deadline_probability: no hops");
  if (!(lambda > 0.0)) throw std::invalid_argument("deadline_probability: lambda must be > 0");
  if (!(k >= 0.0)) throw std::invalid_argument("deadline_probability: k must be >= 0");
  for (double m : mu) {
    if (!(m > 0.0)) throw std::invalid_argument("deadline_probability: service means must be > 0");
  }
  DeadlineResult res;
  if (mu.size() == 1) {
    res.theta.push_back(1.0 / mu[0] - 1.0 / lambda);
  } else {
    for (std::size_t i = 0; i + 1 < mu.size(); ++i) {
      res.theta.push_back(1.0 / (mu[i] + mu[i + 1]) - 1.0 / lambda);
    }
  }
  res.theta_star = *std::min_element(res.theta.begin(), res.theta.end());
  for (std::size_t i = 0; i < res.theta.size(); ++i) {
    if (res.theta[i] <= margin) {
      throw UnstableQueueError("deadline_probability: stage " + std::to_string(i + 1) +
                               " is unstable (theta = " + std::to_string(res.theta[i]) + ")");
    }
  }
  if (mu.size() == 1) {
    res.probability = mu[0] / lambda * std::exp(-k * res.theta_star);
  } else if (mu.size() == 2) {
    res.probability = (mu[0] + mu[1]) / lambda * std::exp(-k * res.theta_star);
  } else {
    res.probability = std::exp(-k * res.theta_star);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Message error and window allocation
// ---------------------------------------------------------------------------

struct ErrorBreakdown {
  double p_outage = 0.0;  // Σ per-hop outage, clamped to 1
  double p_deadline = 0.0;
  double p_total = 0.0;
  double p_outage_exact = 0.0;  // 1 − Π(1 − p_i)
  std::vector<double> per_hop_outage;
  std::vector<double> mean_service;
  double theta_star = 0.0;
};

inline ErrorBreakdown compose_error(std::vector<double> per_hop, std::vector<double> mu,
                                    const FiniteSnrScenario& scenario,
                                    const FiniteSnrOptions& opts) {
  const auto out = combine_outages(std::move(per_hop));
  const auto dl = deadline_probability(mu, scenario.lambda, scenario.k, opts.stability_margin);
  ErrorBreakdown e;
  e.p_outage = std::min(1.0, out.union_sum);
  e.p_outage_exact = out.exact;
  e.p_deadline = std::min(1.0, dl.probability);
  e.p_total = e.p_outage + (1.0 - e.p_outage) * e.p_deadline;
  e.per_hop_outage = out.per_hop;
  e.mean_service = std::move(mu);
  e.theta_star = dl.theta_star;
  return e;
}

inline ErrorBreakdown message_error(const Topology& topology, const WindowAllocation& alloc,
                                    const FiniteSnrScenario& scenario,
                                    const FiniteSnrOptions& opts = {}) {
  alloc.validate(topology);
  scenario.validate();
  std::vector<double> per_hop;
  std::vector<double> mu;
  for (std::size_t i = 0; i < topology.hops(); ++i) {
    per_hop.push_back(hop_outage(topology.hop(i), alloc.windows[i], scenario, opts));
    mu.push_back(mean_service_time(topology.hop(i), alloc.windows[i], scenario, opts));
  }
  return compose_error(std::move(per_hop), std::move(mu), scenario, opts);
}

struct WindowCandidate {
  std::vector<int> windows;
  std::vector<double> mean_service;
  bool per_hop_ok = false;   // 1 <= μ(L_i) <= λ for every hop
  bool pairwise_ok = false;  // every stage θ_i > margin
  bool feasible = false;
  bool disagreement = false;  // the two checks above differ
  std::optional<ErrorBreakdown> error;
  std::string reason;
};

struct WindowOptimization {
  std::optional<WindowCandidate> best;
  std::vector<WindowCandidate> table;  // lexicographic allocation order

  [[nodiscard]] std::string infeasibility_report() const {
    std::string s;
    for (const auto& c : table) {
      if (c.feasible) continue;
      s += "(";
      for (std::size_t i = 0; i < c.windows.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(c.windows[i]);
      }
      s += "): " + c.reason + "\n";
    }
    return s;
  }
};

/// Exhaustive search over integer windows L_i >= 1 with Σ L_i <= budget
/// (default ⌊k⌋). Feasible candidates satisfy both the per-hop and the
/// pairwise constraints; ties go to the lexicographically smallest allocation.
inline WindowOptimization optimize_windows(const Topology& topology,
                                           const FiniteSnrScenario& scenario,
                                           const FiniteSnrOptions& opts = {},
                                           std::optional<int> budget = std::nullopt) {
  scenario.validate();
  const int hops = static_cast<int>(topology.hops());
  const int total = budget.value_or(static_cast<int>(std::floor(scenario.k + 1e-9)));
  if (total < hops) {
    throw InfeasibleError("optimize_windows: budget " + std::to_string(total) +
                          " cannot give every one of " + std::to_string(hops) +
                          " hops a round");
  }
  const int max_window = total - (hops - 1);

  // Per-hop tables of outage and mean service, filled concurrently.
  const auto slots = static_cast<std::size_t>(hops * max_window);
  std::vector<double> outage(slots);
  std::vector<double> mu(slots);
  std::vector<std::string> failure(slots);
  auto fill = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t s = begin; s < slots; s += stride) {
      const auto hop = s / static_cast<std::size_t>(max_window);
      const int w = static_cast<int>(s % static_cast<std::size_t>(max_window)) + 1;
      try {
        outage[s] = hop_outage(topology.hop(hop), w, scenario, opts);
        mu[s] = mean_service_time(topology.hop(hop), w, scenario, opts);
      } catch (const NumericError& e) {
        failure[s] = e.what();
      }
    }
  };
  const unsigned workers =
      std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(slots)));
  if (workers == 1) {
    fill(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(fill, w, workers);
  }
  auto at = [&](int hop, int w) {
    return static_cast<std::size_t>(hop * max_window + (w - 1));
  };

  WindowOptimization res;
  std::vector<int> windows(static_cast<std::size_t>(hops), 1);
  while (true) {
    int used = 0;
    for (int w : windows) used += w;
    if (used <= total) {
      WindowCandidate c;
      c.windows = windows;
      std::vector<double> per_hop;
      std::string numeric_failure;
      for (int i = 0; i < hops; ++i) {
        const auto s = at(i, windows[static_cast<std::size_t>(i)]);
        if (!failure[s].empty()) numeric_failure = failure[s];
        c.mean_service.push_back(mu[s]);
        per_hop.push_back(outage[s]);
      }
      if (!numeric_failure.empty()) {
        c.reason = "numeric failure: " + numeric_failure;
      } else {
        c.per_hop_ok = true;
        for (int i = 0; i < hops; ++i) {
          const double m = c.mean_service[static_cast<std::size_t>(i)];
          if (m < 1.0 - 1e-12 || m > scenario.lambda) {
            c.per_hop_ok = false;
            c.reason += "hop " + std::to_string(i + 1) + ": mu=" + std::to_string(m) +
                        " outside [1, lambda]; ";
          }
        }
        c.pairwise_ok = true;
        try {
          c.error = compose_error(per_hop, c.mean_service, scenario, opts);
        } catch (const UnstableQueueError& e) {
          c.pairwise_ok = false;
          c.reason += std::string(e.what()) + "; ";
        }
        c.feasible = c.per_hop_ok && c.pairwise_ok;
        c.disagreement = c.per_hop_ok != c.pairwise_ok;
        if (!c.feasible) c.error.reset();
        if (!c.reason.empty()) c.reason.resize(c.reason.size() - 2);
      }
      if (c.feasible && (!res.best || c.error->p_total < res.best->error->p_total)) res.best = c;
      res.table.push_back(std::move(c));
    }
    // Next allocation in lexicographic order.
    int i = hops - 1;
    while (i >= 0 && ++windows[static_cast<std::size_t>(i)] > max_window) {
      windows[static_cast<std::size_t>(i)] = 1;
      --i;
    }
    if (i < 0) break;
  }
  return res;
}

}  // namespace dmdt
