#pragma once

/// \file types.hpp
/// Network topology, channel assumption and ARQ protocol descriptions shared
/// by the analytic modules, the simulator and the CLI.

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmdt/tradeoff.hpp"

namespace dmdt {

/// Chain of nodes (M_1, ..., M_N); hop i joins nodes i and i+1.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::vector<int> antennas) : antennas_(std::move(antennas)) {
    if (antennas_.size() < 2) throw std::invalid_argument("Topology: need at least two nodes");
    for (int m : antennas_) check_antennas(m, "Topology");
  }

  [[nodiscard]] std::size_t nodes() const { return antennas_.size(); }
  [[nodiscard]] std::size_t hops() const { return antennas_.size() - 1; }
  [[nodiscard]] const std::vector<int>& antennas() const { return antennas_; }

  /// Zero-based hop index.
  [[nodiscard]] AntennaPair hop(std::size_t i) const {
    if (i >= hops()) throw std::out_of_range("Topology::hop");
    return {antennas_[i], antennas_[i + 1]};
  }

  /// Three-node sub-network starting at zero-based node i.
  [[nodiscard]] Topology subnetwork(std::size_t i) const {
    if (i + 2 >= nodes()) throw std::out_of_range("Topology::subnetwork");
    return Topology({antennas_[i], antennas_[i + 1], antennas_[i + 2]});
  }

  [[nodiscard]] std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < antennas_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(antennas_[i]);
    }
    return s + ")";
  }

  bool operator==(const Topology&) const = default;

 private:
  std::vector<int> antennas_;
};

enum class ChannelAssumption { LongTermStatic, ShortTermStatic };

inline std::string_view to_string(ChannelAssumption c) {
  return c == ChannelAssumption::LongTermStatic ? "long_term" : "short_term";
}

/// Per-hop ARQ windows L_i under a total budget L (Σ L_i ≤ L).
struct WindowAllocation {
  std::vector<int> windows;
  int total_budget = 0;

  [[nodiscard]] int used() const { return std::accumulate(windows.begin(), windows.end(), 0); }

  void validate(const Topology& topology) const {
    if (windows.size() != topology.hops()) {
      throw std::invalid_argument("WindowAllocation: need one window per hop (" +
                                  std::to_string(topology.hops()) + ")");
    }
    for (int w : windows) {
      if (w < 1) throw std::invalid_argument("WindowAllocation: every window must be >= 1");
    }
    if (used() > total_budget) {
      throw std::invalid_argument("WindowAllocation: sum of windows " + std::to_string(used()) +
                                  " exceeds the total round budget " +
                                  std::to_string(total_budget));
    }
  }

  bool operator==(const WindowAllocation&) const = default;
};

enum class ProtocolKind { Fixed, Fbl, Vbl };

inline std::string_view to_string(ProtocolKind p) {
  switch (p) {
    case ProtocolKind::Fixed: return "fixed";
    case ProtocolKind::Fbl: return "fbl";
    case ProtocolKind::Vbl: return "vbl";
  }
  return "?";
}

/// Fixed(windows), FBL(total L) or VBL(total L).
struct ArqProtocol {
  ProtocolKind kind = ProtocolKind::Vbl;
  std::vector<int> windows;  // Fixed only
  int total_rounds = 0;

  static ArqProtocol fixed(std::vector<int> windows, int total = 0) {
    const int sum = std::accumulate(windows.begin(), windows.end(), 0);
    return {ProtocolKind::Fixed, std::move(windows), total > 0 ? total : sum};
  }
  static ArqProtocol fbl(int total) { return {ProtocolKind::Fbl, {}, total}; }
  static ArqProtocol vbl(int total) { return {ProtocolKind::Vbl, {}, total}; }

  [[nodiscard]] WindowAllocation allocation() const { return {windows, total_rounds}; }

  bool operator==(const ArqProtocol&) const = default;
};

}  // namespace dmdt
