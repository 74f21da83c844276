#pragma once

/// \file dispatch.hpp
/// Subcommand routing. Each sweep point is a copy of the RunConfig with the
/// axis values applied; rows come out in grid order whatever the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dmdt/asymptotic.hpp"
#include "dmdt/cli/config.hpp"
#include "dmdt/cli/table.hpp"
#include "dmdt/error.hpp"
#include "dmdt/finite_snr.hpp"
#include "dmdt/netsim.hpp"
#include "dmdt/tradeoff.hpp"

namespace dmdt::cli {

enum ExitCode : int {
  kOk = 0,
  kOtherFailure = 1,
  kValidationFailure = 2,
  kInfeasible = 3,
  kNumericFailure = 4,
};

namespace detail {

using Rows = std::vector<std::vector<Cell>>;

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline void apply_axis(RunConfig& cfg, const std::string& p, double v) {
  if (p == "r") {
    cfg.multiplexing_gain = v;
  } else if (p == "total_rounds") {
    if (!cfg.protocol) throw std::invalid_argument("sweep over total_rounds needs a protocol");
    cfg.protocol->total_rounds = static_cast<int>(v);
  } else if (p == "power_gain") {
    cfg.power_gain = v;
  } else if (p == "snr_db") {
    cfg.snr_db = v;
    cfg.snr_linear.reset();
  } else if (p == "snr_linear") {
    cfg.snr_linear = v;
    cfg.snr_db.reset();
  } else if (p == "arrival_interval_blocks") {
    cfg.arrival_interval_blocks = v;
  } else if (p == "deadline_blocks") {
    cfg.deadline_blocks = v;
  } else if (p == "spatial_rate") {
    cfg.spatial_rate = v;
  } else if (p == "window_budget_blocks") {
    cfg.window_budget_blocks = static_cast<int>(v);
  } else if (p.starts_with("window_")) {
    const std::size_t i = std::stoul(p.substr(7)) - 1;
    auto& proto = cfg.protocol.value();
    proto.windows.at(i) = static_cast<int>(v);
    int sum = 0;
    for (int w : proto.windows) sum += w;
    proto.total_rounds = std::max(proto.total_rounds, sum);
  } else {
    throw std::invalid_argument("unknown sweep parameter " + p);
  }
}

struct SweepPoint {
  std::vector<double> coords;  // one per axis
  RunConfig cfg;
};

/// Cartesian product, first axis outermost.
inline std::vector<SweepPoint> expand(const RunConfig& cfg, const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> pts{{{}, cfg}};
  for (const auto& ax : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : pts) {
      for (double v : ax.grid) {
        SweepPoint q = p;
        q.coords.push_back(v);
        apply_axis(q.cfg, ax.parameter, v);
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

inline Cell axis_cell(const std::string& p, double v) {
  if (is_int_param(p)) return static_cast<std::int64_t>(v);
  return v;
}

/// Evaluates `fn` on every point with up to `workers` threads. The first
/// failure (in grid order) is rethrown.
inline std::vector<Rows> evaluate(const std::vector<SweepPoint>& pts, unsigned workers,
                                  const std::function<Rows(const RunConfig&)>& fn) {
  std::vector<Rows> out(pts.size());
  std::vector<std::exception_ptr> errors(pts.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < pts.size(); i += stride) {
      try {
        out[i] = fn(pts[i].cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(pts.size())));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline bool has_axis(const RunConfig& cfg, const std::string& p) {
  return std::any_of(cfg.sweep.begin(), cfg.sweep.end(),
                     [&](const SweepAxis& a) { return a.parameter == p; });
}

inline int min_dim(const Topology& t) {
  int m = kMaxAntennas;
  for (std::size_t i = 0; i < t.hops(); ++i) m = std::min(m, t.hop(i).min_dim());
  return m;
}

inline int max_dim(const Topology& t) {
  int m = 0;
  for (std::size_t i = 0; i < t.hops(); ++i) m = std::max(m, t.hop(i).min_dim());
  return m;
}

inline std::vector<std::string> hop_columns(const std::string& stem, std::size_t hops) {
  std::vector<std::string> c;
  for (std::size_t i = 0; i < hops; ++i) c.push_back(stem + "_" + std::to_string(i + 1));
  return c;
}

// --- dmt -------------------------------------------------------------------

inline std::vector<std::string> dmt_columns(const RunConfig& cfg) {
  if (cfg.topology.hops() == 1) return {"d"};
  return hop_columns("d_hop", cfg.topology.hops());
}

inline Rows dmt_rows(const RunConfig& cfg) {
  std::vector<Cell> row;
  for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
    row.push_back(dmt_with_power(cfg.topology.hop(i), cfg.multiplexing_gain, cfg.power_gain));
  }
  return {row};
}

// --- dmdt-asymptotic ---------------------------------------------------------

inline bool compare_view(const RunConfig& cfg) {
  if (!cfg.asymptotic_view.empty()) return cfg.asymptotic_view == "compare";
  return cfg.topology.nodes() == 3;
}

inline std::vector<std::string> asymptotic_columns(const RunConfig& cfg) {
  if (compare_view(cfg)) return {"d_fixed_half", "d_fixed_eq", "d_fbl", "d_vbl"};
  return {"d", "lower", "upper", "bounded", "ok", "error"};
}

/// Fixed ARQ at a real split (x, L − x).
inline double fixed_at_split(const RunConfig& cfg, double x, double total) {
  const double r = cfg.multiplexing_gain;
  const double g = cfg.power_gain;
  const bool st = cfg.channel == ChannelAssumption::ShortTermStatic;
  auto hop = [&](std::size_t i, double rounds) {
    if (rounds <= 0.0) return r == 0.0 ? dmt_with_power(cfg.topology.hop(i), 0.0, g) : 0.0;
    return (st ? rounds : 1.0) * dmt_with_power(cfg.topology.hop(i), r / rounds, g);
  };
  return std::min(hop(0, x), hop(1, total - x));
}

inline Rows asymptotic_rows(const RunConfig& cfg) {
  const auto opts = cfg.asymptotic_options();
  const double r = cfg.multiplexing_gain;
  const auto& proto = cfg.protocol.value();
  if (compare_view(cfg)) {
    const int total = proto.total_rounds;
    auto guarded = [](auto&& f) {
      try {
        return f();
      } catch (const std::invalid_argument&) {
        return nan();
      }
    };
    const int half = total / 2;
    const double d_half = guarded([&] {
      return fixed_dmdt_3node(cfg.topology, half, total - half, r, cfg.channel, opts);
    });
    const double d_eq = guarded([&] {
      const auto w = fixed_optimal_windows(cfg.topology, total, r, cfg.channel, opts);
      return fixed_at_split(cfg, w.equalizing_split, total);
    });
    const double d_fbl =
        guarded([&] { return fbl_dmdt_3node(cfg.topology, total, r, cfg.channel, opts); });
    const double d_vbl =
        guarded([&] { return vbl_dmdt_3node(cfg.topology, total, r, cfg.channel, opts).d; });
    return {{d_half, d_eq, d_fbl, d_vbl}};
  }
  CurveSample s;
  try {
    s = evaluate_point(proto, cfg.topology, cfg.channel, r, opts);
  } catch (const std::exception& e) {
    s.r = r;
    s.d = s.lower = s.upper = nan();
    s.ok = false;
    s.error = e.what();
  }
  return {{s.d, s.lower, s.upper, s.bounded, s.ok, s.error}};
}

// --- dmdt-finite -------------------------------------------------------------

inline std::vector<std::string> finite_columns(const RunConfig& cfg) {
  const auto h = cfg.topology.hops();
  std::vector<std::string> c = hop_columns("L", h);
  for (auto& s : hop_columns("outage", h)) c.push_back(s);
  for (auto& s : hop_columns("mean_service", h)) c.push_back(s);
  for (const char* s : {"p_outage", "p_outage_exact", "p_deadline", "p_total", "theta_star", "status"}) {
    c.push_back(s);
  }
  return c;
}

inline Rows finite_rows(const RunConfig& cfg) {
  const auto sc = cfg.scenario();
  const auto opts = cfg.finite_options();
  const auto alloc = cfg.protocol.value().allocation();
  alloc.validate(cfg.topology);
  std::vector<double> per_hop, mu;
  for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
    per_hop.push_back(hop_outage(cfg.topology.hop(i), alloc.windows[i], sc, opts));
    mu.push_back(mean_service_time(cfg.topology.hop(i), alloc.windows[i], sc, opts));
  }
  std::vector<Cell> row;
  for (int w : alloc.windows) row.push_back(static_cast<std::int64_t>(w));
  for (double p : per_hop) row.push_back(p);
  for (double m : mu) row.push_back(m);
  try {
    const auto e = compose_error(per_hop, mu, sc, opts);
    for (double v : {e.p_outage, e.p_outage_exact, e.p_deadline, e.p_total, e.theta_star}) {
      row.push_back(v);
    }
    row.push_back(std::string("ok"));
  } catch (const UnstableQueueError& e) {
    const auto out = combine_outages(per_hop);
    row.push_back(std::min(1.0, out.union_sum));
    row.push_back(out.exact);
    for (int i = 0; i < 3; ++i) row.push_back(nan());
    row.push_back(std::string("unstable: ") + e.what());
  }
  return {row};
}

// --- optimize-arq ------------------------------------------------------------

inline std::vector<std::string> optimize_columns(const RunConfig& cfg) {
  const auto h = cfg.topology.hops();
  std::vector<std::string> c = hop_columns("L", h);
  for (auto& s : hop_columns("mean_service", h)) c.push_back(s);
  for (const char* s : {"p_outage", "p_deadline", "p_total", "per_hop_ok", "pairwise_ok",
                        "feasible", "disagreement", "best", "reason"}) {
    c.push_back(s);
  }
  return c;
}

inline Rows optimize_rows(const RunConfig& cfg) {
  const auto res =
      optimize_windows(cfg.topology, cfg.scenario(), cfg.finite_options(), cfg.window_budget_blocks);
  if (!res.best) {
    throw InfeasibleError("no window allocation satisfies the stability constraints:\n" +
                          res.infeasibility_report());
  }
  Rows rows;
  for (const auto& c : res.table) {
    std::vector<Cell> row;
    for (int w : c.windows) row.push_back(static_cast<std::int64_t>(w));
    for (double m : c.mean_service) row.push_back(m);
    if (c.error) {
      row.push_back(c.error->p_outage);
      row.push_back(c.error->p_deadline);
      row.push_back(c.error->p_total);
    } else {
      for (int i = 0; i < 3; ++i) row.push_back(nan());
    }
    row.push_back(c.per_hop_ok);
    row.push_back(c.pairwise_ok);
    row.push_back(c.feasible);
    row.push_back(c.disagreement);
    row.push_back(c.windows == res.best->windows);
    row.push_back(c.reason);
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- simulate / validate -----------------------------------------------------

inline netsim::SimConfig sim_config(const RunConfig& cfg, std::uint64_t seed) {
  netsim::SimConfig s;
  s.topology = cfg.topology;
  s.protocol = cfg.protocol.value();
  s.channel = cfg.channel;
  s.scenario = cfg.scenario();
  s.messages = cfg.simulation.messages;
  s.warmup = cfg.simulation.warmup;
  s.seed = seed;
  s.service = cfg.simulation.service_mode;
  s.decoding.capacity = cfg.capacity_model();
  s.decoding.rounds = cfg.simulation.decoding_rounds;
  s.decoding.threshold = cfg.threshold;
  s.decoding.max_rounds = cfg.simulation.max_rounds;
  s.clamp_min_one = cfg.clamp_min_one;
  s.service_means = cfg.simulation.service_means_blocks;
  s.workers = cfg.workers;
  return s;
}

struct ExponentCells {
  double exponent = nan();
  double std_error = nan();
  std::string status = "not requested";
};

inline ExponentCells fit_exponent(const RunConfig& cfg, const netsim::SimResult& res) {
  ExponentCells out;
  if (cfg.simulation.exponent_k_grid_blocks.empty()) return out;
  try {
    const auto fit = netsim::estimate_delay_exponent(res.delays, cfg.simulation.exponent_k_grid_blocks);
    out.exponent = fit.exponent;
    out.std_error = fit.std_error;
    out.status = "ok";
  } catch (const InsufficientDataError& e) {
    out.status = e.what();
  }
  return out;
}

inline std::vector<std::string> simulate_columns(const RunConfig& cfg) {
  if (cfg.simulation.emit == "delays") return {"replication", "message", "delay", "wait"};
  std::vector<std::string> c{"replication", "seed",           "counted",        "delivered",
                             "outage_drops", "deadline_drops", "p_outage",       "p_deadline",
                             "p_total",      "mean_delay",     "max_delay"};
  for (auto& s : hop_columns("hop_outage", cfg.topology.hops())) c.push_back(s);
  for (const char* s : {"exponent", "exponent_std_error", "exponent_status", "warnings"}) {
    c.push_back(s);
  }
  return c;
}

inline Rows simulate_rows(const RunConfig& cfg) {
  Rows rows;
  for (std::uint64_t rep = 0; rep < cfg.simulation.replications; ++rep) {
    const std::uint64_t seed = cfg.seed + rep;
    const auto res = netsim::run_network_sim(sim_config(cfg, seed));
    if (cfg.simulation.emit == "delays") {
      for (std::size_t i = 0; i < res.delays.size(); ++i) {
        rows.push_back({static_cast<std::int64_t>(rep), static_cast<std::int64_t>(i),
                        res.delays[i], res.waits[i]});
      }
      continue;
    }
    const double n = static_cast<double>(res.counted());
    double mean = 0.0;
    for (double d : res.delays) mean += d;
    mean = res.delays.empty() ? nan() : mean / static_cast<double>(res.delays.size());
    std::vector<Cell> row{static_cast<std::int64_t>(rep),
                          static_cast<std::int64_t>(seed),
                          static_cast<std::int64_t>(res.counted()),
                          static_cast<std::int64_t>(res.delivered),
                          static_cast<std::int64_t>(res.outage_drops),
                          static_cast<std::int64_t>(res.deadline_drops),
                          res.outage_drops / n,
                          res.deadline_drops / n,
                          (res.outage_drops + res.deadline_drops) / n,
                          mean,
                          res.max_delay};
    for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
      // Exceedance counts exist for fixed windows only.
      row.push_back(cfg.protocol->kind == ProtocolKind::Fixed &&
                            cfg.simulation.service_mode == netsim::ServiceMode::Physical
                        ? res.hop_exceedances[i] / n
                        : nan());
    }
    const auto ex = fit_exponent(cfg, res);
    row.push_back(ex.exponent);
    row.push_back(ex.std_error);
    row.push_back(ex.status);
    std::string warn;
    for (const auto& w : res.warnings) warn += (warn.empty() ? "" : "; ") + w;
    row.push_back(warn);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> validate_columns(const RunConfig&) {
  return {"check", "hop", "analytic", "empirical", "std_error", "z", "verdict"};
}

inline std::vector<Cell> check_row(const std::string& name, std::int64_t hop, double analytic,
                                   double empirical, double se, const std::string& verdict) {
  const double z = se > 0.0 ? (empirical - analytic) / se : nan();
  return {name, hop, analytic, empirical, se, z, verdict};
}

inline std::string band_verdict(double analytic, double empirical, double se) {
  if (se <= 0.0) return empirical == analytic ? "pass" : "fail";
  return std::abs(empirical - analytic) <= 3.0 * se ? "pass" : "fail";
}

inline Rows validate_rows(const RunConfig& cfg) {
  const auto sc = cfg.scenario();
  const auto opts = cfg.finite_options();
  const auto& proto = cfg.protocol.value();
  const auto res = netsim::run_network_sim(sim_config(cfg, cfg.seed));
  const double n = static_cast<double>(res.counted());
  Rows rows;
  auto binomial_se = [n](double p) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / n); };

  if (cfg.simulation.service_mode == netsim::ServiceMode::Physical) {
    std::vector<double> per_hop;
    for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
      const double p = hop_outage(cfg.topology.hop(i), proto.windows[i], sc, opts);
      per_hop.push_back(p);
      const double emp = res.hop_exceedances[i] / n;
      const double se = binomial_se(p);
      rows.push_back(check_row("hop_outage", static_cast<std::int64_t>(i + 1), p, emp, se,
                               band_verdict(p, emp, se)));
    }
    const double p = combine_outages(per_hop).exact;
    const double emp = res.outage_drops / n;
    rows.push_back(check_row("message_outage", 0, p, emp, binomial_se(p),
                             band_verdict(p, emp, binomial_se(p))));
  }

  // Queueing checks need stable stages.
  std::vector<double> mu = res.mean_service;
  if (mu.empty()) {
    mu = cfg.simulation.service_means_blocks;
    if (mu.empty()) {
      for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
        mu.push_back(mean_service_time(cfg.topology.hop(i), proto.windows[i], sc, opts));
      }
    }
  }
  try {
    const auto dl = deadline_probability(mu, sc.lambda, sc.k, opts.stability_margin);
    if (cfg.simulation.service_mode == netsim::ServiceMode::Markovian && mu.size() <= 2) {
      // The closed form is the M/M/1 waiting-time tail at the first stage.
      std::size_t over = 0;
      for (double w : res.waits) over += w > sc.k ? 1 : 0;
      const double emp = over / static_cast<double>(res.waits.size());
      const double se = binomial_se(dl.probability);
      rows.push_back(check_row("waiting_tail", 0, dl.probability, emp, se,
                               band_verdict(dl.probability, emp, se)));
    } else {
      const double delivered = static_cast<double>(res.delays.size());
      const double emp = delivered > 0 ? res.deadline_drops / delivered : nan();
      rows.push_back(check_row("deadline_tail", 0, dl.probability, emp, nan(), "info"));
    }
    if (!cfg.simulation.exponent_k_grid_blocks.empty()) {
      const auto ex = fit_exponent(cfg, res);
      std::string verdict = ex.status;
      if (ex.status == "ok") {
        const bool close = std::abs(ex.exponent - dl.theta_star) <= 0.25 * dl.theta_star;
        const bool not_below = ex.exponent >= dl.theta_star - ex.std_error;
        verdict = close && not_below ? "pass" : "fail";
      }
      rows.push_back(check_row("delay_exponent", 0, dl.theta_star, ex.exponent, ex.std_error, verdict));
    }
  } catch (const UnstableQueueError& e) {
    rows.push_back(check_row("deadline_tail", 0, nan(), nan(), nan(),
                             std::string("skipped: ") + e.what()));
  }
  return rows;
}

struct Route {
  std::function<std::vector<std::string>(const RunConfig&)> columns;
  std::function<Rows(const RunConfig&)> rows;
  bool parallel_points = true;
};

inline Route route(const std::string& sub) {
  if (sub == "dmt") return {dmt_columns, dmt_rows};
  if (sub == "dmdt-asymptotic") return {asymptotic_columns, asymptotic_rows};
  if (sub == "dmdt-finite") return {finite_columns, finite_rows};
  if (sub == "optimize-arq") return {optimize_columns, optimize_rows};
  if (sub == "simulate") return {simulate_columns, simulate_rows, false};
  if (sub == "validate") return {validate_columns, validate_rows, false};
  throw std::invalid_argument("unknown subcommand \"" + sub + "\"");
}

/// Re-throws `e` with the subcommand prefixed, keeping its category.
[[noreturn]] inline void rethrow_with_context(const std::string& sub) {
  try {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const InsufficientDataError& e) {
    throw InsufficientDataError(sub + ": " + e.what(), e.largest_usable_k());
  } catch (const NumericError& e) {
    throw NumericError(sub + ": " + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(sub + ": " + e.what());
  } catch (const UnstableQueueError& e) {
    throw UnstableQueueError(sub + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(sub + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(sub + ": " + e.what());
  }
}

}  // namespace detail

/// Runs the configured subcommand over its sweep and returns the table,
/// provenance attached.
inline ResultTable dispatch(const RunConfig& cfg) {
  try {
    const auto rt = detail::route(cfg.subcommand);
    std::vector<SweepAxis> axes = cfg.sweep;
    // Curves default to an r grid in steps of 0.05 up to where every curve is 0.
    if ((cfg.subcommand == "dmt" || cfg.subcommand == "dmdt-asymptotic") &&
        !detail::has_axis(cfg, "r")) {
      double r_max = detail::max_dim(cfg.topology);
      if (cfg.subcommand == "dmdt-asymptotic") {
        r_max = detail::min_dim(cfg.topology);
        int total = cfg.protocol.value().total_rounds;
        for (const auto& a : cfg.sweep) {
          if (a.parameter == "total_rounds") total = static_cast<int>(a.grid.back());
        }
        r_max *= total;
      }
      axes.push_back({"r", detail::expand_range(0.0, r_max, 0.05)});
    }
    const auto pts = detail::expand(cfg, axes);
    std::vector<std::string> columns;
    for (const auto& a : axes) columns.push_back(a.parameter);
    for (auto& c : rt.columns(cfg)) columns.push_back(c);
    ResultTable table(columns);
    const auto rows = detail::evaluate(pts, rt.parallel_points ? cfg.workers : 1u, rt.rows);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (const auto& r : rows[i]) {
        std::vector<Cell> full;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          full.push_back(detail::axis_cell(axes[a].parameter, pts[i].coords[a]));
        }
        full.insert(full.end(), r.begin(), r.end());
        table.add_row(std::move(full));
      }
    }
    if (cfg.subcommand == "optimize-arq") {
      const auto best = table.column("best");
      for (const auto& row : table.rows()) {
        if (!std::get<bool>(row[best])) continue;
        std::string s = "best";
        for (std::size_t a = 0; a < axes.size(); ++a) {
          s += " " + axes[a].parameter + "=" + detail::render_cell(row[a]);
        }
        for (std::size_t i = 0; i < cfg.topology.hops(); ++i) {
          s += " L_" + std::to_string(i + 1) + "=" +
               detail::render_cell(row[table.column("L_" + std::to_string(i + 1))]);
        }
        s += " p_total=" + detail::render_cell(row[table.column("p_total")]);
        table.provenance().notes.push_back(s);
      }
    }
    return with_provenance(std::move(table), cfg);
  } catch (...) {
    detail::rethrow_with_context(cfg.subcommand);
  }
}

/// Exit status for an exception escaping dispatch or parsing.
inline int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return kValidationFailure;
  } catch (const std::invalid_argument&) {
    return kValidationFailure;
  } catch (const InfeasibleError&) {
    return kInfeasible;
  } catch (const UnstableQueueError&) {
    return kInfeasible;
  } catch (const NumericError&) {
    return kNumericFailure;
  } catch (...) {
    return kOtherFailure;
  }
}

}  // namespace dmdt::cli
