#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "stochex/calculus.hpp"

namespace stochex {

// Smallest |det(I + dL)| over the flagged nodes of L; 1 when L never jumps.
template <typename Scalar>
double check_invertibility(const MatrixPath<Scalar>& l) {
  if (l.rows() != l.cols()) throw ShapeError("check_invertibility: path is not square");
  double margin = 1.0;
  bool any = false;
  for (std::size_t k : l.grid().jump_nodes()) {
    const double m = jump_determinant_margin<Scalar>(l.jump(k));
    margin = any ? std::min(margin, m) : m;
    any = true;
  }
  return any ? margin : 1.0;
}

// Closed-form Doleans exponential of a scalar path Z given <Z^c,Z^c>:
//   exp(Z_t - sum dZ - <Z^c,Z^c>_t / 2) * prod (1 + dZ).
template <typename Scalar>
MatrixPath<Scalar> scalar_doleans(const MatrixPath<Scalar>& z, const MatrixPath<Scalar>& continuous_bracket) {
  using std::abs;
  using std::exp;
  if (z.rows() != 1 || z.cols() != 1) throw ShapeError("scalar_doleans: path must be 1 x 1");
  require_same_grid(z, continuous_bracket, "scalar_doleans");
  const auto& grid = z.grid();
  PathBuilder<Scalar> out(z.grid_ptr());
  Scalar jump_sum(0), product(1);
  auto node = [](Scalar v) { return Mat<Scalar>::Constant(1, 1, v); };
  out.set(0, node(exp(z.value(0)(0, 0) - continuous_bracket.value(0)(0, 0) / Scalar(2))));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const Scalar q = continuous_bracket.value(k)(0, 0) / Scalar(2);
    if (grid.is_jump(k)) {
      const Scalar left = exp(z.left(k)(0, 0) - jump_sum - q) * product;
      const Scalar dz = z.jump(k)(0, 0);
      if (abs(Scalar(1) + dz) < Scalar(kSingularJumpThreshold))
        throw NumericalError("scalar_doleans: jump of -1 at t = " + std::to_string(grid[k]));
      jump_sum += dz;
      product *= Scalar(1) + dz;
      out.set(k, node(left), node(exp(z.value(k)(0, 0) - jump_sum - q) * product));
    } else {
      out.set(k, node(exp(z.value(k)(0, 0) - jump_sum - q) * product));
    }
  }
  return std::move(out).finish();
}

template <typename Scalar>
MatrixPath<Scalar> scalar_doleans(const MatrixPath<Scalar>& z, const DriverSpec<Scalar>& spec) {
  return scalar_doleans(z, analytic_bracket(spec, spec, z, z).continuous);
}

// Solution of U = I + int (dL) U(s-): U <- (I + jump)(I + continuous increment) U.
template <typename Scalar>
MatrixPath<Scalar> matrix_exponential(const MatrixPath<Scalar>& l) {
  using Matrix = Mat<Scalar>;
  if (l.rows() != l.cols()) throw ShapeError("matrix_exponential: driver is not square");
  const auto& grid = l.grid();
  PathBuilder<Scalar> out(l.grid_ptr());
  Matrix u = Matrix::Identity(l.rows(), l.cols());
  out.set(0, u);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    u = u + l.continuous_increment(k) * u;
    if (grid.is_jump(k + 1)) {
      Matrix left = u;
      u = left + l.jump(k + 1) * left;
      out.set(k + 1, std::move(left), u);
    } else {
      out.set(k + 1, u);
    }
  }
  return std::move(out).finish();
}

// W = -L + <L^c,L^c> + sum (I + dL)^{-1} (dL)^2, so that E(L)^{-1} solves
// V = I + int V(s-) dW.
template <typename Scalar>
MatrixPath<Scalar> leandre_W(const MatrixPath<Scalar>& l, const DriverSpec<Scalar>& spec) {
  using Matrix = Mat<Scalar>;
  if (l.rows() != l.cols()) throw ShapeError("leandre_W: driver is not square");
  const auto bracket = analytic_bracket(spec, spec, l, l).continuous;
  const auto& grid = l.grid();
  const auto n = l.rows();
  PathBuilder<Scalar> out(l.grid_ptr());
  Matrix w = Matrix::Zero(n, n);
  out.set(0, w);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    w += -l.continuous_increment(k) + (bracket.value(k + 1) - bracket.value(k));
    if (grid.is_jump(k + 1)) {
      const Matrix dl = l.jump(k + 1);
      if (jump_determinant_margin<Scalar>(dl) < kSingularJumpThreshold)
        throw NumericalError("leandre_W: I + dL is singular at t = " + std::to_string(grid[k + 1]));
      const Matrix correction = (Matrix::Identity(n, n) + dl).partialPivLu().solve(dl * dl);
      Matrix left = w;
      w += -dl + correction;
      out.set(k + 1, std::move(left), w);
    } else {
      out.set(k + 1, w);
    }
  }
  return std::move(out).finish();
}

// U = E(L) together with V = E(L)^{-1} obtained from the W-transform.
template <typename Scalar = double>
struct ExponentialPair {
  MatrixPath<Scalar> U;
  MatrixPath<Scalar> V;
  MatrixPath<Scalar> W;
  double invertibility_margin = 1.0;
  bool conditioning_warning = false;
};

// Solution of V = I + int V(s-) dW: V <- V (I + continuous dW)(I + jump dW).
template <typename Scalar>
MatrixPath<Scalar> right_exponential(const MatrixPath<Scalar>& w) {
  using Matrix = Mat<Scalar>;
  if (w.rows() != w.cols()) throw ShapeError("right_exponential: driver is not square");
  const auto& grid = w.grid();
  PathBuilder<Scalar> out(w.grid_ptr());
  Matrix v = Matrix::Identity(w.rows(), w.cols());
  out.set(0, v);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    v = v + v * w.continuous_increment(k);
    if (grid.is_jump(k + 1)) {
      Matrix left = v;
      v = left + left * w.jump(k + 1);
      out.set(k + 1, std::move(left), v);
    } else {
      out.set(k + 1, v);
    }
  }
  return std::move(out).finish();
}

template <typename Scalar>
ExponentialPair<Scalar> exponential_inverse(const MatrixPath<Scalar>& l, const DriverSpec<Scalar>& spec,
                                            double warning_margin = 1e-3) {
  const double margin = check_invertibility(l);
  if (margin < kSingularJumpThreshold)
    throw NumericalError("exponential_inverse: I + dL is singular (|det| = " + std::to_string(margin) + ")");
  auto w = leandre_W(l, spec);
  auto v = right_exponential(w);
  return {matrix_exponential(l), std::move(v), std::move(w), margin, margin < warning_margin};
}

}  // namespace stochex
