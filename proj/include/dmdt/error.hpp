#pragma once

#include <stdexcept>
#include <string>

namespace dmdt {

/// Quadrature or search that could not meet its contract.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A queue whose arrival rate meets or exceeds its service rate.
class UnstableQueueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No admissible configuration exists for an optimization request.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few samples in a tail to support an estimate.
class InsufficientDataError : public NumericError {
 public:
  InsufficientDataError(const std::string& what, double largest_usable_k)
      : NumericError(what), largest_usable_k_(largest_usable_k) {}
  [[nodiscard]] double largest_usable_k() const { return largest_usable_k_; }

 private:
  double largest_usable_k_;
};

}  // namespace dmdt
