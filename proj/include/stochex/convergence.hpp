#pragma once

#include <optional>
#include <span>

namespace stochex {

struct OrderEstimate {
  double order = 0.0;   // slope of log(error) against log(dt)
  double std_error = 0.0; // standard error of the slope; 0 with three exact points
  bool flat = false;    // order below kFlatOrder: the error is not decreasing
};

inline constexpr double kFlatOrder = 0.1;

// Least-squares fit of log(error) = c + order * log(dt). Needs at least three
// levels (std::invalid_argument otherwise). Returns nullopt when any error is
// zero or non-finite, since the log-slope is undefined then.
std::optional<OrderEstimate> estimate_order(std::span<const double> dt, std::span<const double> error);

}  // namespace stochex
