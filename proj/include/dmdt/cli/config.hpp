#pragma once

/// \file config.hpp
/// Strict JSON run configuration: parse, validate, echo.
///
/// Every physical quantity carries its unit in the key name. Unknown keys are
/// errors. All problems are collected and reported together, each with a path.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dmdt/asymptotic.hpp"
#include "dmdt/finite_snr.hpp"
#include "dmdt/netsim.hpp"
#include "dmdt/types.hpp"

namespace dmdt::cli {

using Json = nlohmann::json;

inline constexpr std::string_view kVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"dmt",      "dmdt-asymptotic", "dmdt-finite",
                                              "optimize-arq", "simulate",    "validate"};
  return names;
}

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(render(issues)), issues_(std::move(issues)) {}
  [[nodiscard]] const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string render(const std::vector<ConfigIssue>& issues) {
    std::string s = std::to_string(issues.size()) + " configuration error(s):";
    for (const auto& i : issues) s += "\n  " + i.path + ": " + i.message;
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

struct SweepAxis {
  std::string parameter;
  std::vector<double> grid;
  bool operator==(const SweepAxis&) const = default;
};

struct SimulationSettings {
  std::uint64_t messages = 100000;
  std::uint64_t warmup = 1000;
  netsim::ServiceMode service_mode = netsim::ServiceMode::Physical;
  std::optional<netsim::CapacityModel> capacity_model;  // follows outage_model when unset
  netsim::RoundMode decoding_rounds = netsim::RoundMode::Continuous;
  int max_rounds = 64;
  std::vector<double> service_means_blocks;
  std::vector<double> exponent_k_grid_blocks;
  std::uint64_t replications = 1;
  std::string emit = "summary";  // summary | delays
  bool operator==(const SimulationSettings&) const = default;
};

struct RunConfig {
  std::string subcommand;
  Topology topology;
  std::optional<ArqProtocol> protocol;
  ChannelAssumption channel = ChannelAssumption::LongTermStatic;
  std::optional<double> snr_db;
  std::optional<double> snr_linear;
  double multiplexing_gain = 1.0;
  double spatial_rate = 1.0;
  std::optional<double> arrival_interval_blocks;
  std::optional<double> deadline_blocks;
  std::optional<int> window_budget_blocks;
  ThresholdVariant threshold = ThresholdVariant::ReceiveScaled;
  OutageModel outage_model = OutageModel::Ostbc;
  bool clamp_min_one = true;
  double power_gain = 1.0;
  FblSplitRange fbl_split = FblSplitRange::PositiveOnly;
  std::string asymptotic_view;  // compare | protocol; empty picks by topology
  std::vector<SweepAxis> sweep;
  SimulationSettings simulation;
  unsigned workers = 1;
  std::optional<std::string> output_path;
  std::string output_format = "csv";
  std::uint64_t seed = 1;

  bool operator==(const RunConfig&) const = default;

  [[nodiscard]] double rho() const {
    if (snr_linear) return *snr_linear;
    if (snr_db) return std::pow(10.0, *snr_db / 10.0);
    throw std::invalid_argument("RunConfig: no SNR configured");
  }

  [[nodiscard]] FiniteSnrScenario scenario() const {
    return {rho(), multiplexing_gain, spatial_rate, arrival_interval_blocks.value_or(1.0),
            deadline_blocks.value_or(1.0)};
  }

  [[nodiscard]] FiniteSnrOptions finite_options() const {
    FiniteSnrOptions o;
    o.threshold = threshold;
    o.outage = outage_model;
    o.clamp_min_one = clamp_min_one;
    o.workers = workers;
    return o;
  }

  [[nodiscard]] AsymptoticOptions asymptotic_options() const { return {power_gain, fbl_split}; }

  [[nodiscard]] netsim::CapacityModel capacity_model() const {
    if (simulation.capacity_model) return *simulation.capacity_model;
    return outage_model == OutageModel::Ostbc ? netsim::CapacityModel::Ostbc
                                              : netsim::CapacityModel::Mimo;
  }
};

// ---------------------------------------------------------------------------
// Enum spellings
// ---------------------------------------------------------------------------

namespace detail {

template <typename E>
struct Spelling {
  E value;
  std::string_view name;
};

inline constexpr Spelling<ChannelAssumption> kChannels[] = {
    {ChannelAssumption::LongTermStatic, "long_term"}, {ChannelAssumption::ShortTermStatic, "short_term"}};
inline constexpr Spelling<ProtocolKind> kProtocols[] = {
    {ProtocolKind::Fixed, "fixed"}, {ProtocolKind::Fbl, "fbl"}, {ProtocolKind::Vbl, "vbl"}};
inline constexpr Spelling<ThresholdVariant> kThresholds[] = {
    {ThresholdVariant::ReceiveScaled, "receive_scaled"}, {ThresholdVariant::Unscaled, "unscaled"}};
inline constexpr Spelling<OutageModel> kOutageModels[] = {
    {OutageModel::Ostbc, "ostbc"}, {OutageModel::GeneralMimo, "general_mimo"}};
inline constexpr Spelling<FblSplitRange> kFblSplits[] = {
    {FblSplitRange::PositiveOnly, "positive"}, {FblSplitRange::IncludeZero, "include_zero"}};
inline constexpr Spelling<netsim::ServiceMode> kServiceModes[] = {
    {netsim::ServiceMode::Physical, "physical"}, {netsim::ServiceMode::Markovian, "markovian"}};
inline constexpr Spelling<netsim::CapacityModel> kCapacityModels[] = {
    {netsim::CapacityModel::Mimo, "mimo"}, {netsim::CapacityModel::Ostbc, "ostbc"}};
inline constexpr Spelling<netsim::RoundMode> kRoundModes[] = {
    {netsim::RoundMode::Continuous, "continuous"}, {netsim::RoundMode::Blockwise, "blockwise"}};

template <typename E, std::size_t N>
std::string spell(const Spelling<E> (&table)[N], E v) {
  for (const auto& s : table) {
    if (s.value == v) return std::string(s.name);
  }
  return "?";
}

template <typename E, std::size_t N>
std::string choices(const Spelling<E> (&table)[N]) {
  std::string s;
  for (const auto& e : table) s += (s.empty() ? "" : ", ") + std::string(e.name);
  return s;
}

inline bool is_int_param(std::string_view p) {
  return p == "total_rounds" || p == "window_budget_blocks" || p.starts_with("window_");
}

/// Collects issues while walking the document.
class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const std::string& path, std::string msg) { issues.push_back({path, std::move(msg)}); }

  void reject_unknown(const Json& obj, const std::string& path,
                      const std::set<std::string>& allowed) {
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.contains(key)) fail(path + "." + key, "unknown key");
    }
  }

  std::optional<double> number(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      fail(path + "." + key, "expected a number, got " + std::string(v.type_name()));
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(path + "." + key, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<std::int64_t> integer(const Json& obj, const std::string& key,
                                      const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path + "." + key, "expected an integer, got " + describe(v));
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::optional<std::uint64_t> unsigned_integer(const Json& obj, const std::string& key,
                                                const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      fail(path + "." + key, "expected a nonnegative integer, got " + describe(v));
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<bool> boolean(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) {
      fail(path + "." + key, "expected true or false, got " + describe(v));
      return std::nullopt;
    }
    return v.get<bool>();
  }

  std::optional<std::string> string(const Json& obj, const std::string& key,
                                    const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_string()) {
      fail(path + "." + key, "expected a string, got " + describe(v));
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  template <typename E, std::size_t N>
  std::optional<E> choice(const Json& obj, const std::string& key, const std::string& path,
                          const Spelling<E> (&table)[N]) {
    const auto s = string(obj, key, path);
    if (!s) return std::nullopt;
    for (const auto& e : table) {
      if (e.name == *s) return e.value;
    }
    fail(path + "." + key, "unknown value \"" + *s + "\" (expected one of: " + choices(table) + ")");
    return std::nullopt;
  }

  std::optional<std::vector<double>> numbers(const Json& obj, const std::string& key,
                                             const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_array()) {
      fail(path + "." + key, "expected an array of numbers, got " + describe(v));
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail(path + "." + key + "[" + std::to_string(i) + "]", "expected a finite number");
        ok = false;
      } else {
        out.push_back(v[i].get<double>());
      }
    }
    return ok ? std::optional(out) : std::nullopt;
  }

  std::optional<std::vector<int>> integers(const Json& obj, const std::string& key,
                                           const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_array()) {
      fail(path + "." + key, "expected an array of integers, got " + describe(v));
      return std::nullopt;
    }
    std::vector<int> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        fail(path + "." + key + "[" + std::to_string(i) + "]", "expected an integer");
        ok = false;
      } else {
        out.push_back(v[i].get<int>());
      }
    }
    return ok ? std::optional(out) : std::nullopt;
  }

  bool object(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return false;
    if (!obj.at(key).is_object()) {
      fail(path + "." + key, "expected an object, got " + describe(obj.at(key)));
      return false;
    }
    return true;
  }

 private:
  static std::string describe(const Json& v) {
    if (v.is_number_float()) return "a fractional number";
    if (v.is_number_integer()) return "a negative integer";
    return v.type_name();
  }
};

inline std::vector<double> expand_range(double start, double stop, double step) {
  std::vector<double> g;
  for (std::size_t i = 0;; ++i) {
    double v = start + static_cast<double>(i) * step;
    if (v > stop + 1e-9 * step) break;
    // Snap 0.15000000000000002 back to 0.15 so echoed grids stay readable.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    v = std::strtod(buf, nullptr);
    g.push_back(v);
  }
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses and validates a configuration document. `subcommand` (from the
/// command line) must agree with the document's own, if it names one.
inline RunConfig parse_config(std::string_view text, std::string_view subcommand = {}) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError({{"$", std::string("not valid JSON: ") + e.what()}});
  }
  detail::Reader rd;
  const std::string root = "$";
  if (!doc.is_object()) throw ConfigError({{root, "top level must be an object"}});
  rd.reject_unknown(doc, root,
                    {"subcommand", "topology", "protocol", "channel", "snr_db", "snr_linear",
                     "multiplexing_gain", "spatial_rate", "arrival_interval_blocks",
                     "deadline_blocks", "window_budget_blocks", "threshold", "outage_model",
                     "clamp_min_one", "power_gain", "fbl_split", "asymptotic_view", "sweep", "simulation", "workers",
                     "output", "seed"});

  RunConfig cfg;
  const auto doc_sub = rd.string(doc, "subcommand", root);
  if (!subcommand.empty() && doc_sub && *doc_sub != subcommand) {
    rd.fail("$.subcommand", "document is for \"" + *doc_sub + "\" but \"" +
                                std::string(subcommand) + "\" was requested");
  }
  cfg.subcommand = !subcommand.empty() ? std::string(subcommand) : doc_sub.value_or("");
  const auto& names = subcommands();
  if (cfg.subcommand.empty()) {
    rd.fail("$.subcommand", "no subcommand given");
  } else if (std::find(names.begin(), names.end(), cfg.subcommand) == names.end()) {
    rd.fail("$.subcommand", "unknown subcommand \"" + cfg.subcommand + "\"");
  }
  const std::string& sub = cfg.subcommand;
  const bool finite = sub == "dmdt-finite" || sub == "optimize-arq" || sub == "simulate" ||
                      sub == "validate";

  // topology
  bool topo_ok = false;
  if (!doc.contains("topology")) {
    rd.fail("$.topology", "required");
  } else if (auto ants = rd.integers(doc, "topology", root)) {
    bool ok = ants->size() >= 2;
    if (!ok) rd.fail("$.topology", "need at least two nodes");
    for (std::size_t i = 0; i < ants->size(); ++i) {
      if ((*ants)[i] < 1 || (*ants)[i] > kMaxAntennas) {
        rd.fail("$.topology[" + std::to_string(i) + "]",
                "antenna count must be in [1, " + std::to_string(kMaxAntennas) + "]");
        ok = false;
      }
    }
    if (ok) {
      cfg.topology = Topology(*ants);
      topo_ok = true;
    }
  }

  // protocol
  if (rd.object(doc, "protocol", root)) {
    const auto& p = doc.at("protocol");
    const std::string path = "$.protocol";
    rd.reject_unknown(p, path, {"kind", "windows", "total_rounds"});
    const auto kind = rd.choice(p, "kind", path, detail::kProtocols);
    if (!p.contains("kind")) rd.fail(path + ".kind", "required");
    const auto windows = rd.integers(p, "windows", path);
    const auto total = rd.integer(p, "total_rounds", path);
    if (kind) {
      ArqProtocol proto;
      proto.kind = *kind;
      bool ok = true;
      if (*kind == ProtocolKind::Fixed) {
        if (!windows) {
          if (!p.contains("windows")) rd.fail(path + ".windows", "required for fixed ARQ");
          ok = false;
        } else {
          proto.windows = *windows;
          for (std::size_t i = 0; i < windows->size(); ++i) {
            if ((*windows)[i] < 1) {
              rd.fail(path + ".windows[" + std::to_string(i) + "]", "window must be >= 1");
              ok = false;
            }
          }
          if (topo_ok && windows->size() != cfg.topology.hops()) {
            rd.fail(path + ".windows", "need one window per hop (" +
                                           std::to_string(cfg.topology.hops()) + "), got " +
                                           std::to_string(windows->size()));
            ok = false;
          }
        }
        int sum = 0;
        for (int w : proto.windows) sum += w;
        proto.total_rounds = total ? static_cast<int>(*total) : sum;
        if (ok && sum > proto.total_rounds) {
          rd.fail(path + ".windows",
                  "sum of windows " + std::to_string(sum) + " exceeds total_rounds " +
                      std::to_string(proto.total_rounds) + " (constraint L_1 + ... + L_{N-1} <= L)");
          ok = false;
        }
      } else {
        if (windows) rd.fail(path + ".windows", "only fixed ARQ takes per-hop windows");
        if (!total) {
          if (!p.contains("total_rounds")) rd.fail(path + ".total_rounds", "required");
          ok = false;
        } else {
          proto.total_rounds = static_cast<int>(*total);
          if (topo_ok && proto.total_rounds < static_cast<int>(cfg.topology.hops())) {
            rd.fail(path + ".total_rounds", "must be at least the hop count " +
                                                std::to_string(cfg.topology.hops()));
            ok = false;
          }
        }
      }
      if (ok) cfg.protocol = proto;
    }
  } else if (!doc.contains("protocol") &&
             (sub == "dmdt-asymptotic" || sub == "dmdt-finite" || sub == "simulate" ||
              sub == "validate")) {
    rd.fail("$.protocol", "required for " + sub);
  }
  if (cfg.protocol && cfg.protocol->kind != ProtocolKind::Fixed &&
      (sub == "dmdt-finite" || sub == "validate")) {
    rd.fail("$.protocol.kind", sub + " evaluates fixed windows only");
  }

  if (auto c = rd.choice(doc, "channel", root, detail::kChannels)) cfg.channel = *c;

  cfg.snr_db = rd.number(doc, "snr_db", root);
  cfg.snr_linear = rd.number(doc, "snr_linear", root);
  if (doc.contains("snr_db") && doc.contains("snr_linear")) {
    rd.fail("$.snr_linear", "give snr_db or snr_linear, not both");
  }
  if (cfg.snr_linear && !(*cfg.snr_linear > 0.0)) rd.fail("$.snr_linear", "must be > 0");
  if (finite && !doc.contains("snr_db") && !doc.contains("snr_linear")) {
    rd.fail("$.snr_db", "an SNR (snr_db or snr_linear) is required for " + sub);
  }

  if (auto v = rd.number(doc, "multiplexing_gain", root)) {
    cfg.multiplexing_gain = *v;
    if (*v < 0.0) rd.fail("$.multiplexing_gain", "must be >= 0");
  }
  if (auto v = rd.number(doc, "spatial_rate", root)) {
    cfg.spatial_rate = *v;
    if (!(*v > 0.0 && *v <= 1.0)) rd.fail("$.spatial_rate", "must be in (0, 1]");
  }
  cfg.arrival_interval_blocks = rd.number(doc, "arrival_interval_blocks", root);
  if (cfg.arrival_interval_blocks && !(*cfg.arrival_interval_blocks > 0.0)) {
    rd.fail("$.arrival_interval_blocks", "must be > 0");
  }
  cfg.deadline_blocks = rd.number(doc, "deadline_blocks", root);
  if (cfg.deadline_blocks && !(*cfg.deadline_blocks >= 1.0)) {
    rd.fail("$.deadline_blocks", "must be >= 1");
  }
  if (finite) {
    if (!doc.contains("arrival_interval_blocks")) {
      rd.fail("$.arrival_interval_blocks", "required for " + sub);
    }
    if (!doc.contains("deadline_blocks")) rd.fail("$.deadline_blocks", "required for " + sub);
  }
  if (auto v = rd.integer(doc, "window_budget_blocks", root)) {
    cfg.window_budget_blocks = static_cast<int>(*v);
    if (*v < 1) rd.fail("$.window_budget_blocks", "must be >= 1");
  }
  if (auto v = rd.choice(doc, "threshold", root, detail::kThresholds)) cfg.threshold = *v;
  if (auto v = rd.choice(doc, "outage_model", root, detail::kOutageModels)) cfg.outage_model = *v;
  if (auto v = rd.boolean(doc, "clamp_min_one", root)) cfg.clamp_min_one = *v;
  if (auto v = rd.number(doc, "power_gain", root)) {
    cfg.power_gain = *v;
    if (!(*v > 0.0)) rd.fail("$.power_gain", "must be > 0");
  }
  if (auto v = rd.choice(doc, "fbl_split", root, detail::kFblSplits)) cfg.fbl_split = *v;
  if (auto v = rd.string(doc, "asymptotic_view", root)) {
    if (*v != "compare" && *v != "protocol") {
      rd.fail("$.asymptotic_view", "expected \"compare\" or \"protocol\"");
    } else if (*v == "compare" && topo_ok && cfg.topology.nodes() != 3) {
      rd.fail("$.asymptotic_view", "the protocol comparison needs a three-node topology");
    } else {
      cfg.asymptotic_view = *v;
    }
  }
  if (auto v = rd.unsigned_integer(doc, "workers", root)) {
    cfg.workers = static_cast<unsigned>(*v);
    if (*v < 1 || *v > 256) rd.fail("$.workers", "must be in [1, 256]");
  }
  if (auto v = rd.unsigned_integer(doc, "seed", root)) cfg.seed = *v;

  if (rd.object(doc, "output", root)) {
    const auto& o = doc.at("output");
    rd.reject_unknown(o, "$.output", {"path", "format"});
    cfg.output_path = rd.string(o, "path", "$.output");
    if (auto f = rd.string(o, "format", "$.output")) {
      if (*f != "csv" && *f != "json") {
        rd.fail("$.output.format", "expected \"csv\" or \"json\"");
      } else {
        cfg.output_format = *f;
      }
    }
  }

  // sweep axes
  if (doc.contains("sweep")) {
    const auto& sw = doc.at("sweep");
    if (!sw.is_array()) {
      rd.fail("$.sweep", "expected an array of axes");
    } else {
      std::set<std::string> seen;
      for (std::size_t a = 0; a < sw.size(); ++a) {
        const std::string path = "$.sweep[" + std::to_string(a) + "]";
        if (!sw[a].is_object()) {
          rd.fail(path, "expected an object");
          continue;
        }
        const auto& ax = sw[a];
        rd.reject_unknown(ax, path, {"parameter", "grid", "start", "stop", "step"});
        SweepAxis axis;
        const auto param = rd.string(ax, "parameter", path);
        if (!param) {
          if (!ax.contains("parameter")) rd.fail(path + ".parameter", "required");
          continue;
        }
        axis.parameter = *param;
        static const std::set<std::string> known{
            "r", "total_rounds", "power_gain", "snr_db", "snr_linear", "arrival_interval_blocks",
            "deadline_blocks", "spatial_rate", "window_budget_blocks"};
        bool param_ok = known.contains(*param);
        if (param->starts_with("window_") && *param != "window_budget_blocks") {
          const std::string idx = param->substr(7);
          const bool digits = !idx.empty() && idx.find_first_not_of("0123456789") == std::string::npos;
          const std::size_t i = digits ? std::stoul(idx) : 0;
          param_ok = digits && i >= 1 && (!topo_ok || i <= cfg.topology.hops());
          if (!cfg.protocol || cfg.protocol->kind != ProtocolKind::Fixed) {
            rd.fail(path + ".parameter", "\"" + *param + "\" needs a fixed-ARQ protocol");
          }
        }
        if (!param_ok) {
          rd.fail(path + ".parameter", "unknown sweep parameter \"" + *param + "\"");
        }
        if (!seen.insert(*param).second) rd.fail(path + ".parameter", "axis repeated");
        if (ax.contains("grid")) {
          if (ax.contains("start") || ax.contains("stop") || ax.contains("step")) {
            rd.fail(path, "give either grid or start/stop/step");
          }
          if (auto g = rd.numbers(ax, "grid", path)) axis.grid = *g;
        } else {
          const auto start = rd.number(ax, "start", path);
          const auto stop = rd.number(ax, "stop", path);
          const auto step = rd.number(ax, "step", path);
          if (!start || !stop || !step) {
            rd.fail(path, "need grid, or start, stop and step");
          } else if (!(*step > 0.0)) {
            rd.fail(path + ".step", "must be > 0");
          } else if (*stop < *start) {
            rd.fail(path + ".stop", "must be >= start");
          } else {
            axis.grid = detail::expand_range(*start, *stop, *step);
          }
        }
        if (axis.grid.empty()) {
          rd.fail(path + ".grid", "must not be empty");
        }
        for (std::size_t i = 1; i < axis.grid.size(); ++i) {
          if (!(axis.grid[i] > axis.grid[i - 1])) {
            rd.fail(path + ".grid", "must be strictly increasing (index " + std::to_string(i) + ")");
            break;
          }
        }
        if (detail::is_int_param(*param)) {
          for (std::size_t i = 0; i < axis.grid.size(); ++i) {
            if (axis.grid[i] != std::floor(axis.grid[i]) || axis.grid[i] < 1.0) {
              rd.fail(path + ".grid[" + std::to_string(i) + "]", "must be a positive integer");
            }
          }
        }
        if (*param == "r") {
          for (double v : axis.grid) {
            if (v < 0.0) {
              rd.fail(path + ".grid", "multiplexing gains must be >= 0");
              break;
            }
          }
        }
        if (*param == "deadline_blocks" || *param == "arrival_interval_blocks" ||
            *param == "snr_linear" || *param == "power_gain" || *param == "spatial_rate") {
          for (double v : axis.grid) {
            if (!(v > 0.0) || (*param == "deadline_blocks" && v < 1.0) ||
                (*param == "spatial_rate" && v > 1.0)) {
              rd.fail(path + ".grid", "value " + std::to_string(v) + " out of range for " + *param);
              break;
            }
          }
        }
        if (*param == "total_rounds" && cfg.protocol && cfg.protocol->kind == ProtocolKind::Fixed &&
            !axis.grid.empty()) {
          int sum = 0;
          for (int w : cfg.protocol->windows) sum += w;
          if (axis.grid.front() < sum) {
            rd.fail(path + ".grid", "total_rounds below the window sum " + std::to_string(sum) +
                                        " (constraint L_1 + ... + L_{N-1} <= L)");
          }
        }
        cfg.sweep.push_back(std::move(axis));
      }
    }
  }

  // simulation
  if (rd.object(doc, "simulation", root)) {
    const auto& s = doc.at("simulation");
    const std::string path = "$.simulation";
    rd.reject_unknown(s, path,
                      {"messages", "warmup", "service_mode", "capacity_model", "decoding_rounds",
                       "max_rounds", "service_means_blocks", "exponent_k_grid_blocks",
                       "replications", "emit"});
    auto& sim = cfg.simulation;
    if (auto v = rd.unsigned_integer(s, "messages", path)) sim.messages = *v;
    if (auto v = rd.unsigned_integer(s, "warmup", path)) sim.warmup = *v;
    if (sim.messages < 1) rd.fail(path + ".messages", "must be >= 1");
    if (sim.warmup > sim.messages) rd.fail(path + ".warmup", "exceeds messages");
    if (auto v = rd.choice(s, "service_mode", path, detail::kServiceModes)) sim.service_mode = *v;
    if (auto v = rd.choice(s, "capacity_model", path, detail::kCapacityModels)) {
      sim.capacity_model = *v;
    }
    if (auto v = rd.choice(s, "decoding_rounds", path, detail::kRoundModes)) sim.decoding_rounds = *v;
    if (auto v = rd.integer(s, "max_rounds", path)) {
      sim.max_rounds = static_cast<int>(*v);
      if (*v < 1 || *v > 100000) rd.fail(path + ".max_rounds", "must be in [1, 100000]");
    }
    if (auto v = rd.numbers(s, "service_means_blocks", path)) {
      sim.service_means_blocks = *v;
      if (topo_ok && v->size() != cfg.topology.hops()) {
        rd.fail(path + ".service_means_blocks", "need one mean per hop");
      }
      for (double m : *v) {
        if (!(m > 0.0)) {
          rd.fail(path + ".service_means_blocks", "means must be > 0");
          break;
        }
      }
    }
    if (auto v = rd.numbers(s, "exponent_k_grid_blocks", path)) {
      sim.exponent_k_grid_blocks = *v;
      if (v->size() < 2) rd.fail(path + ".exponent_k_grid_blocks", "need at least two values");
      for (std::size_t i = 1; i < v->size(); ++i) {
        if (!((*v)[i] > (*v)[i - 1])) {
          rd.fail(path + ".exponent_k_grid_blocks", "must be strictly increasing");
          break;
        }
      }
    }
    if (auto v = rd.unsigned_integer(s, "replications", path)) {
      sim.replications = *v;
      if (*v < 1 || *v > 10000) rd.fail(path + ".replications", "must be in [1, 10000]");
    }
    if (auto v = rd.string(s, "emit", path)) {
      if (*v != "summary" && *v != "delays") {
        rd.fail(path + ".emit", "expected \"summary\" or \"delays\"");
      } else {
        sim.emit = *v;
      }
    }
    if (sim.service_mode == netsim::ServiceMode::Markovian && cfg.protocol &&
        cfg.protocol->kind != ProtocolKind::Fixed && sim.service_means_blocks.empty()) {
      rd.fail(path + ".service_means_blocks", "markovian mode needs fixed windows or explicit means");
    }
  }

  if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
  return cfg;
}

// ---------------------------------------------------------------------------
// Echo
// ---------------------------------------------------------------------------

/// Canonical document for `cfg`: every default filled in, keys sorted.
/// parse_config(to_json(cfg).dump()) == cfg.
inline Json to_json(const RunConfig& cfg) {
  Json j;
  j["subcommand"] = cfg.subcommand;
  j["topology"] = cfg.topology.antennas();
  if (cfg.protocol) {
    Json p;
    p["kind"] = detail::spell(detail::kProtocols, cfg.protocol->kind);
    if (cfg.protocol->kind == ProtocolKind::Fixed) p["windows"] = cfg.protocol->windows;
    p["total_rounds"] = cfg.protocol->total_rounds;
    j["protocol"] = p;
  }
  j["channel"] = detail::spell(detail::kChannels, cfg.channel);
  if (cfg.snr_db) j["snr_db"] = *cfg.snr_db;
  if (cfg.snr_linear) j["snr_linear"] = *cfg.snr_linear;
  j["multiplexing_gain"] = cfg.multiplexing_gain;
  j["spatial_rate"] = cfg.spatial_rate;
  if (cfg.arrival_interval_blocks) j["arrival_interval_blocks"] = *cfg.arrival_interval_blocks;
  if (cfg.deadline_blocks) j["deadline_blocks"] = *cfg.deadline_blocks;
  if (cfg.window_budget_blocks) j["window_budget_blocks"] = *cfg.window_budget_blocks;
  j["threshold"] = detail::spell(detail::kThresholds, cfg.threshold);
  j["outage_model"] = detail::spell(detail::kOutageModels, cfg.outage_model);
  j["clamp_min_one"] = cfg.clamp_min_one;
  j["power_gain"] = cfg.power_gain;
  j["fbl_split"] = detail::spell(detail::kFblSplits, cfg.fbl_split);
  if (!cfg.asymptotic_view.empty()) j["asymptotic_view"] = cfg.asymptotic_view;
  Json sweep = Json::array();
  for (const auto& a : cfg.sweep) sweep.push_back({{"parameter", a.parameter}, {"grid", a.grid}});
  j["sweep"] = sweep;
  const auto& s = cfg.simulation;
  Json sim;
  sim["messages"] = s.messages;
  sim["warmup"] = s.warmup;
  sim["service_mode"] = detail::spell(detail::kServiceModes, s.service_mode);
  if (s.capacity_model) sim["capacity_model"] = detail::spell(detail::kCapacityModels, *s.capacity_model);
  sim["decoding_rounds"] = detail::spell(detail::kRoundModes, s.decoding_rounds);
  sim["max_rounds"] = s.max_rounds;
  if (!s.service_means_blocks.empty()) sim["service_means_blocks"] = s.service_means_blocks;
  if (!s.exponent_k_grid_blocks.empty()) sim["exponent_k_grid_blocks"] = s.exponent_k_grid_blocks;
  sim["replications"] = s.replications;
  sim["emit"] = s.emit;
  j["simulation"] = sim;
  j["workers"] = cfg.workers;
  Json out;
  if (cfg.output_path) out["path"] = *cfg.output_path;
  out["format"] = cfg.output_format;
  j["output"] = out;
  j["seed"] = cfg.seed;
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// The config as echoed in output files: to_json minus `workers` and
/// `output.path`. Neither changes results, so reruns stay byte-identical.
inline std::string provenance_echo(const RunConfig& cfg) {
  Json j = to_json(cfg);
  j.erase("workers");
  if (auto it = j.find("output"); it != j.end()) {
    it->erase("path");
    if (it->empty()) j.erase(it);
  }
  return j.dump();
}

/// FNV-1a of the echoed config line.
inline std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(provenance_echo(cfg))));
  return buf;
}

}  // namespace dmdt::cli
