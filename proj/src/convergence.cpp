#include "stochex/convergence.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace stochex {

std::optional<OrderEstimate> estimate_order(std::span<const double> dt, std::span<const double> error) {
  if (dt.size() != error.size()) throw std::invalid_argument("estimate_order: size mismatch");
  const auto n = static_cast<Eigen::Index>(dt.size());
  if (n < 3) throw std::invalid_argument("estimate_order: need at least three refinement levels");
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = error[static_cast<std::size_t>(i)];
    const double h = dt[static_cast<std::size_t>(i)];
    if (!(e > 0.0) || !std::isfinite(e)) return std::nullopt;
    if (!(h > 0.0)) throw std::invalid_argument("estimate_order: step sizes must be positive");
    x(i) = std::log(h);
    y(i) = std::log(e);
  }
  x.array() -= x.mean();
  y.array() -= y.mean();
  const double sxx = x.squaredNorm();
  if (sxx <= 0.0) throw std::invalid_argument("estimate_order: step sizes must differ");
  OrderEstimate out;
  out.order = x.dot(y) / sxx;
  const double rss = (y - out.order * x).squaredNorm();
  out.std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  out.flat = out.order < kFlatOrder;
  return out;
}

}  // namespace stochex
