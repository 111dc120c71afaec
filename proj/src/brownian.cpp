#include "stochex/brownian.hpp"

#include <cmath>
#include <numbers>

#include "stochex/rng.hpp"

namespace stochex {

namespace {

// Standard normal addressed by (key, level, index), via Box-Muller on two
// hashed uniforms. Counter-based so any node of the dyadic tree can be drawn
// without generating its neighbours.
double tree_normal(std::uint64_t key, std::uint64_t level, std::uint64_t index) {
  const std::uint64_t h1 = splitmix64(splitmix64(key ^ (level * 0x9e3779b97f4a7c15ULL)) ^ index);
  const std::uint64_t h2 = splitmix64(h1);
  const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

double brownian_at(std::uint64_t key, double horizon, double t) {
  const double tol = 1e-12 * horizon;
  if (t <= tol) return 0.0;
  double lo = 0.0, hi = horizon, blo = 0.0, bhi = std::sqrt(horizon) * tree_normal(key, 0, 0);
  if (std::abs(t - horizon) <= tol) return bhi;
  std::uint64_t index = 0;
  for (std::uint64_t level = 1;; ++level) {
    const double mid = lo + (hi - lo) / 2.0;
    const double bmid = (blo + bhi) / 2.0 + std::sqrt((hi - lo) / 4.0) * tree_normal(key, level, index);
    if (std::abs(t - mid) <= tol || hi - lo <= 2.0 * tol) return bmid;
    if (t < mid) {
      hi = mid;
      bhi = bmid;
      index = 2 * index;
    } else {
      lo = mid;
      blo = bmid;
      index = 2 * index + 1;
    }
  }
}

Eigen::MatrixXd brownian_nodes(const TimeGrid& grid, Eigen::Index d, std::uint64_t seed) {
  Eigen::MatrixXd out(d, static_cast<Eigen::Index>(grid.size()));
  const std::uint64_t root = derive_seed(seed, Stream::kBrownian);
  for (Eigen::Index r = 0; r < d; ++r) {
    const std::uint64_t key = derive_seed(root, static_cast<std::uint64_t>(r));
    for (std::size_t k = 0; k < grid.size(); ++k)
      out(r, static_cast<Eigen::Index>(k)) = brownian_at(key, grid.horizon(), grid[k]);
  }
  return out;
}

}  // namespace stochex
