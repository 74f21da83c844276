#pragma once

/// \file tradeoff.hpp
/// Point-to-point DMT, eigenvalue-exponent algebra and ARQ decoding times.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmdt {

/// Largest antenna count accepted anywhere in the toolkit.
inline constexpr int kMaxAntennas = 8;

inline void check_antennas(int m, const char* what) {
  if (m < 1 || m > kMaxAntennas) {
    throw std::invalid_argument(std::string(what) + ": antenna count must be in [1, " +
                                std::to_string(kMaxAntennas) + "], got " + std::to_string(m));
  }
}

/// Antennas at the two ends of one hop.
struct AntennaPair {
  int m_tx = 1;
  int m_rx = 1;

  AntennaPair() = default;
  AntennaPair(int tx, int rx) : m_tx(tx), m_rx(rx) {
    check_antennas(tx, "AntennaPair");
    check_antennas(rx, "AntennaPair");
  }

  [[nodiscard]] int min_dim() const { return std::min(m_tx, m_rx); }
  [[nodiscard]] int max_dim() const { return std::max(m_tx, m_rx); }
  [[nodiscard]] AntennaPair swapped() const { return {m_rx, m_tx}; }
  bool operator==(const AntennaPair&) const = default;
};

/// SNR exponents α_j of the nonzero eigenvalues λ_j = ρ^{-α_j} of one hop.
class ExponentVector {
 public:
  ExponentVector() = default;
  explicit ExponentVector(std::vector<double> alpha, bool ordered = true)
      : alpha_(std::move(alpha)), ordered_(ordered) {
    for (std::size_t j = 0; j < alpha_.size(); ++j) {
      if (!(alpha_[j] >= 0.0)) throw std::invalid_argument("ExponentVector: alpha must be >= 0");
      if (ordered_ && j > 0 && alpha_[j] > alpha_[j - 1]) {
        throw std::invalid_argument("ExponentVector: alpha must be nonincreasing");
      }
    }
  }

  [[nodiscard]] std::span<const double> values() const { return alpha_; }
  [[nodiscard]] std::size_t size() const { return alpha_.size(); }
  [[nodiscard]] bool ordered() const { return ordered_; }

 private:
  std::vector<double> alpha_;
  bool ordered_ = true;
};

/// Per-round exponent vectors of a short-term static hop.
struct ExponentSchedule {
  std::vector<ExponentVector> per_round;
};

/// Power-control exponent g(l): the SNR in round l is ρ^{g(l)}. Defaults to g ≡ 1.
class PowerControlExponent {
 public:
  PowerControlExponent() = default;

  static PowerControlExponent constant(double g) { return PowerControlExponent({g}, true); }
  /// Round l (1-based) uses values[l-1]; rounds past the end reuse the last value.
  static PowerControlExponent schedule(std::vector<double> values) {
    return PowerControlExponent(std::move(values), false);
  }

  [[nodiscard]] double at(int round) const {
    if (constant_ || values_.size() == 1) return values_.front();
    const auto i = static_cast<std::size_t>(std::max(round, 1) - 1);
    return values_[std::min(i, values_.size() - 1)];
  }
  [[nodiscard]] bool is_constant() const {
    return constant_ || std::all_of(values_.begin(), values_.end(),
                                    [&](double v) { return v == values_.front(); });
  }
  [[nodiscard]] double constant_value() const {
    if (!is_constant()) throw std::invalid_argument("power control exponent is not constant");
    return values_.front();
  }

 private:
  PowerControlExponent(std::vector<double> values, bool constant)
      : values_(std::move(values)), constant_(constant) {
    if (values_.empty()) throw std::invalid_argument("power control: empty schedule");
    for (double v : values_) {
      if (!(v >= 1.0) || !std::isfinite(v)) {
        throw std::invalid_argument("power control: g(l) must be finite and >= 1");
      }
    }
  }

  std::vector<double> values_{1.0};
  bool constant_ = true;
};

/// d^{(M1,M2)}(r): piecewise-linear interpolation of (k, (M1-k)(M2-k)),
/// zero for r >= min(M1, M2).
inline double dmt(const AntennaPair& pair, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("dmt: multiplexing gain must be >= 0");
  const int m = pair.min_dim();
  if (r >= m) return 0.0;
  const int k = static_cast<int>(std::floor(r));
  const double frac = r - k;
  const double left = static_cast<double>(pair.m_tx - k) * (pair.m_rx - k);
  const double right = static_cast<double>(pair.m_tx - k - 1) * (pair.m_rx - k - 1);
  return left + frac * (right - left);
}

/// DMT of a hop whose SNR is scaled to ρ^g: g·d(r/g).
inline double dmt_with_power(const AntennaPair& pair, double r, double g) {
  return g * dmt(pair, r / g);
}

/// S = Σ_j (g − α_j)^+.
inline double capacity_exponent(const ExponentVector& alpha, double g = 1.0) {
  double s = 0.0;
  for (double a : alpha.values()) s += std::max(g - a, 0.0);
  return s;
}

inline double capacity_exponent(const ExponentVector& alpha, const PowerControlExponent& g,
                                int round) {
  return capacity_exponent(alpha, g.at(round));
}

/// Smallest positive integer t with Σ_{l≤t} S_l ≥ r; nullopt when never reached.
inline std::optional<int> decoding_time_blockwise(std::span<const double> s_per_round, double r) {
  double acc = 0.0;
  for (std::size_t l = 0; l < s_per_round.size(); ++l) {
    acc += s_per_round[l];
    if (acc >= r) return static_cast<int>(l + 1);
  }
  return std::nullopt;
}

/// Real t with Σ_{l≤⌊t⌋} S_l + (t−⌊t⌋)·S_{⌊t⌋+1} = r; nullopt when never reached.
inline std::optional<double> decoding_time_continuous(std::span<const double> s_per_round,
                                                      double r) {
  if (r <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t l = 0; l < s_per_round.size(); ++l) {
    const double s = s_per_round[l];
    if (acc + s >= r) {
      return static_cast<double>(l) + (s > 0.0 ? (r - acc) / s : 0.0);
    }
    acc += s;
  }
  return std::nullopt;
}

}  // namespace dmdt
