#pragma once

// Brownian motion on [0, T] as a fixed function of (seed, t): values come from
// a dyadic Brownian-bridge refinement whose normals are addressed by tree
// position. Any grid samples the same path, so refinement levels of a
// convergence study are coupled pathwise.

#include <Eigen/Dense>
#include <cstdint>

#include "stochex/time_grid.hpp"

namespace stochex {

double brownian_at(std::uint64_t key, double horizon, double t);

// d x (grid size) matrix of node values; component r uses its own key.
Eigen::MatrixXd brownian_nodes(const TimeGrid& grid, Eigen::Index d, std::uint64_t seed);

}  // namespace stochex
