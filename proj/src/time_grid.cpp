#include "stochex/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "stochex/rng.hpp"

namespace stochex {

TimeGrid::TimeGrid(std::vector<double> nodes, std::vector<bool> jump_flags)
    : nodes_(std::move(nodes)), flags_(std::move(jump_flags)) {
  if (nodes_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
  if (flags_.size() != nodes_.size())
    throw std::invalid_argument("TimeGrid: one jump flag per node required");
  if (nodes_.front() != 0.0) throw std::invalid_argument("TimeGrid: first node must be 0");
  for (std::size_t k = 1; k < nodes_.size(); ++k) {
    if (!(nodes_[k] > nodes_[k - 1]))
      throw std::invalid_argument("TimeGrid: nodes must be strictly increasing");
  }
  if (flags_.front()) throw std::invalid_argument("TimeGrid: no jump at the time origin");
}

std::vector<std::size_t> TimeGrid::jump_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < flags_.size(); ++k)
    if (flags_[k]) out.push_back(k);
  return out;
}

double TimeGrid::max_dt() const {
  double m = 0.0;
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) m = std::max(m, dt(k));
  return m;
}

std::optional<std::size_t> TimeGrid::find_node(double t) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
  const double tol = merge_tolerance();
  std::optional<std::size_t> best;
  double best_dist = tol;
  for (auto c : {it, it == nodes_.begin() ? it : std::prev(it)}) {
    if (c == nodes_.end()) continue;
    const double d = std::abs(*c - t);
    if (d <= best_dist) {
      best_dist = d;
      best = static_cast<std::size_t>(c - nodes_.begin());
    }
  }
  return best;
}

GridPtr build_grid(double horizon, long steps, std::span<const double> jump_times) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("build_grid: horizon must be positive");
  if (steps <= 0) throw std::invalid_argument("build_grid: steps must be positive");

  std::vector<double> jumps(jump_times.begin(), jump_times.end());
  std::sort(jumps.begin(), jumps.end());
  const double tol = 1e-12 * horizon;
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (!(jumps[i] > 0.0 && jumps[i] < horizon))
      throw std::invalid_argument("build_grid: jump time " + std::to_string(jumps[i]) +
                                  " outside (0, T)");
    if (i > 0 && jumps[i] - jumps[i - 1] <= tol)
      throw std::invalid_argument("build_grid: duplicate jump time " + std::to_string(jumps[i]));
  }

  std::vector<double> nodes;
  std::vector<bool> flags;
  nodes.reserve(static_cast<std::size_t>(steps) + jumps.size() + 1);
  std::size_t j = 0;
  for (long i = 0; i <= steps; ++i) {
    const double t = i == steps ? horizon : horizon * static_cast<double>(i) / static_cast<double>(steps);
    bool flagged = false;
    while (j < jumps.size() && jumps[j] <= t + tol) {
      if (std::abs(jumps[j] - t) <= tol) {
        flagged = true;
      } else {
        nodes.push_back(jumps[j]);
        flags.push_back(true);
      }
      ++j;
    }
    nodes.push_back(t);
    flags.push_back(flagged);
  }
  return std::make_shared<const TimeGrid>(std::move(nodes), std::move(flags));
}

std::vector<double> realize_jump_times(double rate, double horizon, std::uint64_t seed) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("realize_jump_times: rate must be finite and nonnegative");
  std::vector<double> out;
  if (rate == 0.0) return out;
  auto rng = make_stream(seed, Stream::kJumpTimes);
  std::exponential_distribution<double> gap(rate);
  double t = gap(rng);
  while (t < horizon) {
    if (t > 0.0) out.push_back(t);
    t += gap(rng);
  }
  return out;
}

std::vector<double> merge_jump_times(const std::vector<std::vector<double>>& lists,
                                     double tolerance) {
  std::vector<double> all;
  for (const auto& l : lists) all.insert(all.end(), l.begin(), l.end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double t : all)
    if (out.empty() || t - out.back() > tolerance) out.push_back(t);
  return out;
}

}  // namespace stochex
