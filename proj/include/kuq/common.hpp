#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kuq {

// Error taxonomy. CLI maps config_error -> exit 2, numeric/invariant -> exit 3.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct invariant_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed interval [lo, hi]; hi may be +inf for half-line domains.
struct Interval {
  double lo{-1.0};
  double hi{1.0};

  bool contains(double w, double tol = 0.0) const {
    return w >= lo - tol && w <= hi + tol;
  }
  double width() const { return hi - lo; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

}  // namespace kuq
