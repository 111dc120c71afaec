#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace stochex {

// Ordered partition 0 = t_0 < ... < t_K = T. Some nodes are flagged as jump
// times; paths may only jump at flagged nodes.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> nodes, std::vector<bool> jump_flags);

  double horizon() const { return nodes_.back(); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t steps() const { return nodes_.size() - 1; }
  double operator[](std::size_t k) const { return nodes_[k]; }
  double dt(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
  bool is_jump(std::size_t k) const { return flags_[k]; }
  const std::vector<double>& nodes() const { return nodes_; }
  std::vector<std::size_t> jump_nodes() const;
  double max_dt() const;

  // Index of the node within the merge tolerance of t, if any.
  std::optional<std::size_t> find_node(double t) const;

  double merge_tolerance() const { return 1e-12 * horizon(); }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.nodes_ == b.nodes_ && a.flags_ == b.flags_;
  }

 private:
  std::vector<double> nodes_;
  std::vector<bool> flags_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

// Uniform partition of [0, T] into `steps` intervals with the jump times merged
// in as flagged nodes. A jump time within the merge tolerance of a uniform node
// flags that node instead of adding a new one.
GridPtr build_grid(double horizon, long steps, std::span<const double> jump_times = {});

// Sorted arrival times in (0, T) of a Poisson process with the given rate.
std::vector<double> realize_jump_times(double rate, double horizon, std::uint64_t seed);

// Sorted union of several jump-time lists; times closer than `tolerance` are
// merged into one.
std::vector<double> merge_jump_times(const std::vector<std::vector<double>>& lists,
                                     double tolerance);

}  // namespace stochex
