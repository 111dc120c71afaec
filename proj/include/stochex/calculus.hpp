#pragma once

#include <string>

#include "stochex/paths.hpp"

// Discrete stochastic calculus on the grid model used throughout the library:
// each interval (t_k, t_{k+1}] is a continuous sub-step t_k -> t_{k+1}-
// followed by the jump sub-step t_{k+1}- -> t_{k+1} at flagged nodes.
// Integrands are read at the start of each sub-step, so the continuous part
// sees F(t_k) and the jump sees F(t_{k+1}-).

namespace stochex {

// [A,B] split into its continuous part and the sum of jump products.
template <typename Scalar = double>
struct BracketPath {
  MatrixPath<Scalar> total;
  MatrixPath<Scalar> continuous;
  MatrixPath<Scalar> jumps;
};

namespace detail {

template <typename Scalar>
void require_product(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b, const char* who) {
  require_same_grid(a, b, who);
  if (a.cols() != b.rows())
    throw ShapeError(std::string(who) + ": inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + " do not conform");
}

// Assembles total = continuous + jumps from per-interval increments.
template <typename Scalar, typename ContFn, typename JumpFn>
BracketPath<Scalar> accumulate_bracket(const GridPtr& grid, Eigen::Index rows, Eigen::Index cols,
                                       ContFn cont_increment, JumpFn jump_increment) {
  using Matrix = Mat<Scalar>;
  PathBuilder<Scalar> total(grid), cont(grid), jumps(grid);
  Matrix c = Matrix::Zero(rows, cols);
  Matrix j = Matrix::Zero(rows, cols);
  total.set(0, c);
  cont.set(0, c);
  jumps.set(0, j);
  for (std::size_t k = 0; k + 1 < grid->size(); ++k) {
    c += cont_increment(k);
    cont.set(k + 1, c);
    if (grid->is_jump(k + 1)) {
      Matrix j_left = j;
      j += jump_increment(k + 1);
      jumps.set(k + 1, j_left, j);
      total.set(k + 1, c + j_left, c + j);
    } else {
      jumps.set(k + 1, j);
      total.set(k + 1, c + j);
    }
  }
  return {std::move(total).finish(), std::move(cont).finish(), std::move(jumps).finish()};
}

}  // namespace detail

// I(t) = int_0^t (dZ) F(s-), integrator on the left: Z is n x p, F is p x m.
template <typename Scalar>
MatrixPath<Scalar> integrate_left(const MatrixPath<Scalar>& dz, const MatrixPath<Scalar>& f) {
  using Matrix = Mat<Scalar>;
  detail::require_product(dz, f, "integrate_left");
  const auto& grid = dz.grid();
  PathBuilder<Scalar> out(dz.grid_ptr());
  Matrix acc = Matrix::Zero(dz.rows(), f.cols());
  out.set(0, acc);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    acc.noalias() += dz.continuous_increment(k) * f.value(k);
    if (grid.is_jump(k + 1)) {
      Matrix left = acc;
      acc.noalias() += dz.jump(k + 1) * f.left(k + 1);
      out.set(k + 1, std::move(left), acc);
    } else {
      out.set(k + 1, acc);
    }
  }
  return std::move(out).finish();
}

// I(t) = int_0^t F(s-) dZ(s), integrator on the right: F is n x p, Z is p x m.
template <typename Scalar>
MatrixPath<Scalar> integrate_right(const MatrixPath<Scalar>& f, const MatrixPath<Scalar>& dz) {
  using Matrix = Mat<Scalar>;
  detail::require_product(f, dz, "integrate_right");
  const auto& grid = dz.grid();
  PathBuilder<Scalar> out(dz.grid_ptr());
  Matrix acc = Matrix::Zero(f.rows(), dz.cols());
  out.set(0, acc);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    acc.noalias() += f.value(k) * dz.continuous_increment(k);
    if (grid.is_jump(k + 1)) {
      Matrix left = acc;
      acc.noalias() += f.left(k + 1) * dz.jump(k + 1);
      out.set(k + 1, std::move(left), acc);
    } else {
      out.set(k + 1, acc);
    }
  }
  return std::move(out).finish();
}

// Model-free covariation: sum of products of sub-step increments. The jump
// part at a flagged node is exactly dA * dB.
template <typename Scalar>
BracketPath<Scalar> realized_bracket(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  detail::require_product(a, b, "realized_bracket");
  return detail::accumulate_bracket<Scalar>(
      a.grid_ptr(), a.rows(), b.cols(),
      [&](std::size_t k) -> Mat<Scalar> { return a.continuous_increment(k) * b.continuous_increment(k); },
      [&](std::size_t k) -> Mat<Scalar> { return a.jump(k) * b.jump(k); });
}

// Bracket from the generating specs: the continuous part accrues
// sum_r sigmaA_r(t) sigmaB_r(t) dt (left-point rule), the jump part is summed
// from the realized jumps of the two paths.
template <typename Scalar>
BracketPath<Scalar> analytic_bracket(const DriverSpec<Scalar>& spec_a, const DriverSpec<Scalar>& spec_b,
                                     const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  detail::require_product(a, b, "analytic_bracket");
  if (spec_a.rows != a.rows() || spec_a.cols != a.cols() || spec_b.rows != b.rows() || spec_b.cols != b.cols())
    throw ShapeError("analytic_bracket: spec shape differs from its path");
  const bool both = spec_a.has_diffusion() && spec_b.has_diffusion();
  if (both && spec_a.brownian_dim() != spec_b.brownian_dim())
    throw ShapeError("analytic_bracket: specs load Brownian motions of different dimension");
  const auto& grid = a.grid();
  return detail::accumulate_bracket<Scalar>(
      a.grid_ptr(), a.rows(), b.cols(),
      [&](std::size_t k) -> Mat<Scalar> {
        Mat<Scalar> inc = Mat<Scalar>::Zero(a.rows(), b.cols());
        if (!both) return inc;
        const double t = grid[k];
        for (std::size_t r = 0; r < spec_a.diffusion.size(); ++r) {
          if (!spec_a.diffusion[r] || !spec_b.diffusion[r]) continue;
          inc.noalias() += spec_a.diffusion[r](t) * spec_b.diffusion[r](t);
        }
        return inc * static_cast<Scalar>(grid.dt(k));
      },
      [&](std::size_t k) -> Mat<Scalar> { return a.jump(k) * b.jump(k); });
}

// sup_t || A(t)B(t) - A(0)B(0) - int A- dB - int (dA) B- - [A,B](t) ||.
// Zero up to rounding for any pair of paths on a shared grid.
template <typename Scalar>
double ibp_residual(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  detail::require_product(a, b, "ibp_residual");
  const auto ab = a * b;
  const auto lhs_origin = MatrixPath<Scalar>::constant(a.grid_ptr(), a.value(0) * b.value(0));
  const auto rhs = integrate_right(a, b) + integrate_left(a, b) + realized_bracket(a, b).total;
  return static_cast<double>(sup_distance(ab - lhs_origin, rhs));
}

}  // namespace stochex
