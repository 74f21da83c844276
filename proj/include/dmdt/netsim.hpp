#pragma once

/// \file netsim.hpp
/// Monte Carlo engine: Rayleigh block fading, ARQ decoding times and the
/// half-duplex queueing recursion, plus delay-exponent regression.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmdt/error.hpp"
#include "dmdt/finite_snr.hpp"
#include "dmdt/tradeoff.hpp"
#include "dmdt/types.hpp"

namespace dmdt::netsim {

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// SplitMix64 generator. Streams are derived by hashing (seed, keys), so the
/// draws of message n on hop i never depend on how many workers ran.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] RandomSource stream(std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) const {
    std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    h = mix(h ^ mix(a + 0x9e3779b97f4a7c15ULL));
    h = mix(h ^ mix(b + 0xbb67ae8584caa73bULL));
    h = mix(h ^ mix(c + 0x3c6ef372fe94f82bULL));
    return RandomSource(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform on (0, 1), 53-bit resolution.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

  /// CN(0,1): independent real and imaginary parts of variance 1/2.
  std::complex<double> complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

  double exponential(double mean) { return -mean * std::log(uniform()); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_;
  std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Channels and decoding
// ---------------------------------------------------------------------------

/// m_rx × m_tx matrix of i.i.d. CN(0,1) gains.
struct ChannelDraw {
  Eigen::MatrixXcd entries;
};

inline ChannelDraw draw_channel(const AntennaPair& pair, RandomSource& rng) {
  ChannelDraw h{Eigen::MatrixXcd(pair.m_rx, pair.m_tx)};
  for (int c = 0; c < pair.m_tx; ++c) {
    for (int r = 0; r < pair.m_rx; ++r) h.entries(r, c) = rng.complex_normal();
  }
  return h;
}

/// log2 det(I + ρ/M_tx · H H†) from the eigenvalues of H H†.
inline double instantaneous_capacity(const ChannelDraw& h, const AntennaPair& pair, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("instantaneous_capacity: rho must be > 0");
  const Eigen::MatrixXcd gram = h.entries * h.entries.adjoint();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram, Eigen::EigenvaluesOnly);
  double c = 0.0;
  for (Eigen::Index j = 0; j < solver.eigenvalues().size(); ++j) {
    c += std::log2(1.0 + rho / pair.m_tx * std::max(0.0, solver.eigenvalues()(j)));
  }
  return c;
}

/// r_s · log2(1 + ρ/M_tx · ‖H‖_F²), the mutual information seen by an OSTBC.
inline double ostbc_capacity(const ChannelDraw& h, const AntennaPair& pair, double rho,
                             double r_s) {
  return r_s * std::log2(1.0 + rho / pair.m_tx * h.entries.squaredNorm());
}

enum class CapacityModel { Mimo, Ostbc };
enum class RoundMode { Continuous, Blockwise };

struct DecodingOptions {
  CapacityModel capacity = CapacityModel::Mimo;
  RoundMode rounds = RoundMode::Continuous;
  ThresholdVariant threshold = ThresholdVariant::ReceiveScaled;
  int max_rounds = 64;  // short-term accumulation horizon
};

/// Rounds needed by one hop to accumulate r·log2(B) bits per channel use;
/// +inf when a short-term hop does not get there within max_rounds.
inline double sample_decoding_rounds(const AntennaPair& pair, ChannelAssumption channel,
                                     const FiniteSnrScenario& scenario, RandomSource& rng,
                                     const DecodingOptions& opts = {}) {
  const double base = opts.threshold == ThresholdVariant::ReceiveScaled
                          ? 1.0 + pair.m_rx * scenario.rho
                          : 1.0 + scenario.rho;
  const double required = scenario.r * std::log2(base);
  auto capacity = [&](const ChannelDraw& h) {
    return opts.capacity == CapacityModel::Mimo
               ? instantaneous_capacity(h, pair, scenario.rho)
               : ostbc_capacity(h, pair, scenario.rho, scenario.r_s);
  };
  const bool blockwise = opts.rounds == RoundMode::Blockwise;

  if (channel == ChannelAssumption::LongTermStatic) {
    const double c = capacity(draw_channel(pair, rng));
    if (required <= 0.0) return blockwise ? 1.0 : 0.0;
    if (c <= 0.0) return numerics::kInf;
    const double t = required / c;
    return blockwise ? std::max(1.0, std::ceil(t)) : t;
  }

  std::vector<double> per_round;
  per_round.reserve(static_cast<std::size_t>(opts.max_rounds));
  double acc = 0.0;
  for (int l = 0; l < opts.max_rounds; ++l) {
    per_round.push_back(capacity(draw_channel(pair, rng)));
    acc += per_round.back();
    if (acc >= required) break;
  }
  if (blockwise) {
    const auto t = decoding_time_blockwise(per_round, required);
    return t ? static_cast<double>(*t) : numerics::kInf;
  }
  const auto t = decoding_time_continuous(per_round, required);
  return t ? *t : numerics::kInf;
}

// ---------------------------------------------------------------------------
// Network simulation
// ---------------------------------------------------------------------------

/// Queues at the source and relays 2..N-2; a point-to-point link has one.
inline std::size_t stage_count(std::size_t hops) { return hops == 1 ? 1 : hops - 1; }

/// Tandem of stage queues, W_n = (W_{n-1} + S_{n-1} - A_n)^+ at each stage,
/// with every stage fed by the departures of the one before it.
class StageTandem {
 public:
  explicit StageTandem(std::size_t stages) : last_departure_(stages, 0.0) {}

  /// Returns (wait at the first stage, time from arrival to leaving the last
  /// stage entered). A message may leave early after an outage.
  std::pair<double, double> push(double arrival, std::span<const double> service) {
    double t = arrival;
    double first_wait = 0.0;
    for (std::size_t s = 0; s < service.size(); ++s) {
      const double start = std::max(t, last_departure_[s]);
      if (s == 0) first_wait = start - arrival;
      t = start + service[s];
      last_departure_[s] = t;
    }
    return {first_wait, t - arrival};
  }

 private:
  std::vector<double> last_departure_;
};

/// physical: services from channel draws. markovian: stage services are
/// exponential with mean μ_i + μ_{i+1}, no outage.
enum class ServiceMode { Physical, Markovian };

struct SimConfig {
  Topology topology;
  ArqProtocol protocol;
  ChannelAssumption channel = ChannelAssumption::LongTermStatic;
  FiniteSnrScenario scenario;
  std::size_t messages = 100000;
  std::size_t warmup = 0;
  std::uint64_t seed = 1;
  ServiceMode service = ServiceMode::Physical;
  DecodingOptions decoding;
  bool clamp_min_one = true;
  std::vector<double> service_means;  // markovian override of μ(L_i), blocks
  unsigned workers = 1;
  bool record_trace = false;  // keep arrivals and stage services, warmup included

  void validate() const {
    scenario.validate();
    if (warmup > messages) throw std::invalid_argument("SimConfig: warmup exceeds message count");
    if (messages == 0) throw std::invalid_argument("SimConfig: need at least one message");
    if (protocol.kind == ProtocolKind::Fixed) {
      protocol.allocation().validate(topology);
    } else if (protocol.total_rounds < static_cast<int>(topology.hops())) {
      throw std::invalid_argument("SimConfig: total rounds below the hop count");
    }
    if (!service_means.empty()) {
      if (service_means.size() != topology.hops()) {
        throw std::invalid_argument("SimConfig: service_means needs one entry per hop");
      }
      for (double m : service_means) {
        if (!(m > 0.0)) throw std::invalid_argument("SimConfig: service means must be > 0");
      }
    }
    if (service == ServiceMode::Markovian && protocol.kind != ProtocolKind::Fixed &&
        service_means.empty()) {
      throw std::invalid_argument("SimConfig: markovian mode needs fixed windows or service_means");
    }
  }
};

struct SimResult {
  SimConfig config;
  std::vector<double> delays;   // end-to-end delay of every non-outage message, D_n = Σ D_n^i
  std::vector<double> waits;    // queueing delay at the source before hop 1
  std::size_t delivered = 0;    // within the deadline
  std::size_t outage_drops = 0;
  std::size_t deadline_drops = 0;
  double max_delay = 0.0;
  std::vector<std::size_t> hop_attempts;        // messages that reached hop i
  std::vector<std::size_t> hop_outages;         // of those, dropped at hop i
  std::vector<std::size_t> hop_exceedances;     // t_i > L_i over all messages
  std::vector<std::vector<std::size_t>> round_histogram;  // [hop][rounds used]
  std::vector<double> mean_service;             // μ used by markovian mode
  std::vector<std::string> warnings;
  std::vector<double> trace_arrivals;
  std::vector<double> trace_stage_services;  // row-major, one row per message

  [[nodiscard]] std::size_t counted() const { return delivered + outage_drops + deadline_drops; }
};

namespace detail {

template <typename F>
void parallel_for(std::size_t count, unsigned workers, const F& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  }
}

enum StreamTag : std::uint64_t { kArrivals = 1, kHop = 2, kStage = 3 };

}  // namespace detail

/// Runs one replication: Poisson arrivals, per-hop services and the
/// half-duplex schedule in which hop i needs both node i and node i+1 idle.
inline SimResult run_network_sim(const SimConfig& config) {
  config.validate();
  const auto& topo = config.topology;
  const std::size_t hops = topo.hops();
  const std::size_t n_msg = config.messages;
  const RandomSource root(config.seed);
  const auto& sc = config.scenario;

  SimResult res;
  res.config = config;
  res.hop_attempts.assign(hops, 0);
  res.hop_outages.assign(hops, 0);
  res.hop_exceedances.assign(hops, 0);

  std::vector<double> arrivals(n_msg);
  {
    double t = 0.0;
    for (std::size_t n = 0; n < n_msg; ++n) {
      auto rng = root.stream(detail::kArrivals, n);
      t += rng.exponential(sc.lambda);
      arrivals[n] = t;
    }
  }

  const bool fixed = config.protocol.kind == ProtocolKind::Fixed;
  std::vector<double> window(hops, static_cast<double>(config.protocol.total_rounds));
  if (fixed) {
    for (std::size_t i = 0; i < hops; ++i) window[i] = config.protocol.windows[i];
  }

  // Markovian mode: tandem of stage queues with exponential services.
  if (config.service == ServiceMode::Markovian) {
    std::vector<double> mu = config.service_means;
    if (mu.empty()) {
      FiniteSnrOptions fo;
      fo.threshold = config.decoding.threshold;
      fo.clamp_min_one = config.clamp_min_one;
      for (std::size_t i = 0; i < hops; ++i) {
        mu.push_back(mean_service_time(topo.hop(i), config.protocol.windows[i], sc, fo));
      }
    }
    res.mean_service = mu;
    std::vector<double> stage_mean;  // one queue per three-node stage
    if (hops == 1) {
      stage_mean.push_back(mu[0]);
    } else {
      for (std::size_t i = 0; i + 1 < hops; ++i) stage_mean.push_back(mu[i] + mu[i + 1]);
    }
    for (std::size_t i = 0; i < stage_mean.size(); ++i) {
      if (stage_mean[i] >= sc.lambda) {
        res.warnings.push_back("stage " + std::to_string(i + 1) + " is unstable: mean service " +
                               std::to_string(stage_mean[i]) + " >= lambda");
      }
    }
    const std::size_t stages = stage_mean.size();
    std::vector<double> service(n_msg * stages);
    detail::parallel_for(n_msg, config.workers, [&](std::size_t n) {
      for (std::size_t s = 0; s < stages; ++s) {
        auto rng = root.stream(detail::kStage, n, s);
        service[n * stages + s] = rng.exponential(stage_mean[s]);
      }
    });
    StageTandem tandem(stages);
    for (std::size_t n = 0; n < n_msg; ++n) {
      const auto row = std::span(service).subspan(n * stages, stages);
      const auto [wait, d] = tandem.push(arrivals[n], row);
      if (config.record_trace) {
        res.trace_arrivals.push_back(arrivals[n]);
        res.trace_stage_services.insert(res.trace_stage_services.end(), row.begin(), row.end());
      }
      if (n < config.warmup) continue;
      res.delays.push_back(d);
      res.waits.push_back(wait);
      res.max_delay = std::max(res.max_delay, d);
      (d > sc.k ? res.deadline_drops : res.delivered)++;
    }
    return res;
  }

  // Physical mode: raw decoding times per (message, hop), drawn by index.
  std::vector<double> raw(n_msg * hops);
  detail::parallel_for(n_msg, config.workers, [&](std::size_t n) {
    for (std::size_t i = 0; i < hops; ++i) {
      auto rng = root.stream(detail::kHop, n, i);
      raw[n * hops + i] = sample_decoding_rounds(topo.hop(i), config.channel, sc, rng,
                                                 config.decoding);
    }
  });

  res.round_histogram.assign(hops, {});
  for (std::size_t i = 0; i < hops; ++i) {
    res.round_histogram[i].assign(static_cast<std::size_t>(std::ceil(window[i])) + 1, 0);
  }

  const bool blockwise = config.decoding.rounds == RoundMode::Blockwise;
  const std::size_t stages = stage_count(hops);
  std::vector<double> svc(hops);
  std::vector<double> stage_service(stages);
  StageTandem tandem(stages);
  for (std::size_t n = 0; n < n_msg; ++n) {
    const bool counted = n >= config.warmup;
    double budget = window[0];  // remaining rounds for FBL/VBL
    std::optional<std::size_t> dropped_at;
    // Every draw counts here, including hops a dropped message never reaches.
    if (counted && fixed) {
      for (std::size_t i = 0; i < hops; ++i) {
        double t = raw[n * hops + i];
        if (blockwise) t = std::ceil(t);
        if (t > window[i]) ++res.hop_exceedances[i];
      }
    }
    std::fill(svc.begin(), svc.end(), 0.0);
    for (std::size_t i = 0; i < hops && !dropped_at; ++i) {
      double t = raw[n * hops + i];
      if (config.protocol.kind == ProtocolKind::Fbl || blockwise) t = std::ceil(t);
      const double cap = fixed ? window[i] : budget;
      if (t > cap) {
        svc[i] = cap;  // the window is spent before the hop gives up
        dropped_at = i;
      } else {
        svc[i] = fixed && config.clamp_min_one ? std::max(1.0, t) : t;
      }
      budget -= svc[i];
      if (counted) {
        ++res.hop_attempts[i];
        if (dropped_at) ++res.hop_outages[i];
        const auto bucket = std::min(res.round_histogram[i].size() - 1,
                                     static_cast<std::size_t>(std::ceil(svc[i] - 1e-12)));
        ++res.round_histogram[i][bucket];
      }
    }
    for (std::size_t s = 0; s < stages; ++s) {
      stage_service[s] = hops == 1 ? svc[0] : svc[s] + svc[s + 1];
    }
    const std::size_t enters = dropped_at ? std::min(*dropped_at, stages - 1) + 1 : stages;
    const auto [wait, delay] = tandem.push(arrivals[n], std::span(stage_service).first(enters));
    if (config.record_trace) {
      res.trace_arrivals.push_back(arrivals[n]);
      res.trace_stage_services.insert(res.trace_stage_services.end(), stage_service.begin(),
                                      stage_service.end());
    }
    if (!counted) continue;
    if (dropped_at) {
      ++res.outage_drops;
      continue;
    }
    res.delays.push_back(delay);
    res.waits.push_back(wait);
    res.max_delay = std::max(res.max_delay, delay);
    (delay > sc.k ? res.deadline_drops : res.delivered)++;
  }
  return res;
}

/// Independent replications with seeds seed, seed+1, ...; run concurrently.
inline std::vector<SimResult> run_replications(const SimConfig& config, std::size_t count,
                                               unsigned workers = 1) {
  std::vector<SimResult> out(count);
  detail::parallel_for(count, workers, [&](std::size_t i) {
    SimConfig c = config;
    c.seed = config.seed + i;
    c.workers = 1;
    out[i] = run_network_sim(c);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Delay exponent
// ---------------------------------------------------------------------------

struct DelayExponentFit {
  double exponent = 0.0;  // −slope
  double std_error = 0.0;  // batch means when available, else regression
  double regression_std_error = 0.0;
  std::size_t batches_used = 0;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> k;
  std::vector<double> log_tail;
  std::vector<std::size_t> exceedances;
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    rss += e * e;
  }
  f.std_error = x.size() > 2 ? std::sqrt(rss / (m - 2.0) / sxx) : 0.0;
  return f;
}

/// log of the empirical tail at each k; empty when some k has no exceedance.
inline std::vector<double> log_tail(std::span<const double> delays, std::span<const double> ks) {
  std::vector<double> out;
  const double n = static_cast<double>(delays.size());
  for (double k : ks) {
    const auto e = std::count_if(delays.begin(), delays.end(), [k](double d) { return d > k; });
    if (e == 0) return {};
    out.push_back(std::log(static_cast<double>(e) / n));
  }
  return out;
}

}  // namespace detail

/// Least-squares fit of log P{D > k} against k. Delays arrive in message
/// order and are correlated, so the standard error comes from refitting on
/// `batches` contiguous blocks rather than from the regression residuals.
inline DelayExponentFit estimate_delay_exponent(std::span<const double> delays,
                                                std::span<const double> k_grid,
                                                std::size_t min_samples = 10000,
                                                std::size_t min_exceedances = 50,
                                                std::size_t batches = 10) {
  if (k_grid.size() < 2) throw std::invalid_argument("estimate_delay_exponent: need >= 2 k values");
  for (std::size_t i = 1; i < k_grid.size(); ++i) {
    if (!(k_grid[i] > k_grid[i - 1])) {
      throw std::invalid_argument("estimate_delay_exponent: k grid must be increasing");
    }
  }
  std::vector<double> sorted(delays.begin(), delays.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  auto exceed = [&](double k) {
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), k));
  };
  // Largest k that still leaves min_exceedances samples above it.
  const double usable = n > min_exceedances ? sorted[n - min_exceedances - 1] : 0.0;
  if (n < min_samples) {
    throw InsufficientDataError("estimate_delay_exponent: " + std::to_string(n) +
                                    " samples, need " + std::to_string(min_samples),
                                usable);
  }
  DelayExponentFit fit;
  for (double k : k_grid) {
    const std::size_t e = exceed(k);
    fit.k.push_back(k);
    fit.exceedances.push_back(e);
    fit.log_tail.push_back(e > 0 ? std::log(static_cast<double>(e) / static_cast<double>(n))
                                 : -numerics::kInf);
  }
  if (fit.exceedances.back() < min_exceedances) {
    throw InsufficientDataError("estimate_delay_exponent: only " +
                                    std::to_string(fit.exceedances.back()) +
                                    " exceedances at k=" + std::to_string(k_grid.back()) +
                                    "; largest usable k is " + std::to_string(usable),
                                usable);
  }
  const auto line = detail::least_squares(fit.k, fit.log_tail);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.exponent = -line.slope;
  fit.regression_std_error = line.std_error;
  fit.std_error = line.std_error;

  if (batches >= 2) {
    const std::size_t size = n / batches;
    std::vector<double> slopes;
    for (std::size_t b = 0; b < batches && size > 0; ++b) {
      const auto y = detail::log_tail(delays.subspan(b * size, size), k_grid);
      if (y.empty()) {
        slopes.clear();
        break;
      }
      slopes.push_back(detail::least_squares(fit.k, y).slope);
    }
    if (slopes.size() == batches) {
      double mean = 0.0;
      for (double v : slopes) mean += v;
      mean /= static_cast<double>(batches);
      double ss = 0.0;
      for (double v : slopes) ss += (v - mean) * (v - mean);
      fit.std_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
      fit.batches_used = batches;
    }
  }
  return fit;
}

}  // namespace dmdt::netsim
