#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "stochex/exponential.hpp"

// Nonlinear SDE with linear multiplicative noise,
//   dX^i = f^i(t, X) dt + sum_j C^i_j(t) X^j dB^j,
// solved pathwise through the random ODE for Y = U^{-1} X, where U = E(L) and
// L^i_j = int C^i_j dB^j.

namespace stochex {

template <typename Scalar = double>
struct NonlinearProblem {
  using Matrix = Mat<Scalar>;
  using Vector = Vec<Scalar>;

  Eigen::Index n = 1;
  std::function<Matrix(double)> C;  // n x n; empty means zero
  // Must be safe to call concurrently.
  std::function<Vector(double, const Vector&)> f;
  double lipschitz = 0.0;  // user-declared estimate, reported only
  Vector x0;
  double horizon = 1.0;

  void validate() const {
    if (n <= 0) throw ShapeError("NonlinearProblem: dimension must be positive");
    if (x0.size() != n) throw ShapeError("NonlinearProblem: x0 has the wrong length");
    if (!f) throw std::invalid_argument("NonlinearProblem: missing vector field");
    if (!(horizon > 0.0)) throw std::invalid_argument("NonlinearProblem: horizon must be positive");
  }
};

// A state path; if the blow-up guard fired, nodes from `abort_node` on are NaN.
template <typename Scalar = double>
struct StatePath {
  MatrixPath<Scalar> path;
  bool blew_up = false;
  std::size_t abort_node = 0;
};

inline constexpr double kDefaultBlowupBound = 1e8;

template <typename Scalar = double>
struct NoiseDriver {
  MatrixPath<Scalar> L;
  DriverSpec<Scalar> spec;
};

// L^i_j(t) = int_0^t C^i_j(s) dB^j(s): column j is driven by B^j.
template <typename Scalar>
NoiseDriver<Scalar> build_L(const std::function<Mat<Scalar>(double)>& c, const MatrixPath<Scalar>& brownian) {
  const auto n = brownian.rows();
  if (brownian.cols() != 1) throw ShapeError("build_L: Brownian path must be a column");
  DriverSpec<Scalar> spec;
  spec.rows = n;
  spec.cols = n;
  spec.exponential_base = true;
  spec.diffusion.resize(static_cast<std::size_t>(n));
  if (c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      spec.diffusion[static_cast<std::size_t>(r)] = [c, r, n](double t) -> Mat<Scalar> {
        const Mat<Scalar> full = c(t);
        if (full.rows() != n || full.cols() != n) throw ShapeError("build_L: C(t) has the wrong shape");
        Mat<Scalar> only = Mat<Scalar>::Zero(n, n);
        only.col(r) = full.col(r);
        return only;
      };
    }
  }
  auto l = sample_driver(spec, brownian.grid_ptr(), brownian, 0);
  return {std::move(l), std::move(spec)};
}

// dU = (dL) U, U(0) = I.
template <typename Scalar>
MatrixPath<Scalar> build_U(const std::function<Mat<Scalar>(double)>& c, const MatrixPath<Scalar>& brownian) {
  return matrix_exponential(build_L(c, brownian).L);
}

namespace detail {

template <typename Scalar>
Vec<Scalar> checked_field(const std::function<Vec<Scalar>(double, const Vec<Scalar>&)>& f, double t,
                          const Vec<Scalar>& x) {
  Vec<Scalar> v = f(t, x);
  if (v.size() != x.size()) throw ShapeError("vector field returned the wrong dimension");
  if (!v.allFinite()) throw NumericalError("vector field is not finite at t = " + std::to_string(t));
  return v;
}

template <typename Scalar>
StatePath<Scalar> state_path(const GridPtr& grid, std::vector<Vec<Scalar>> states, bool blew_up,
                             std::size_t abort_node) {
  PathBuilder<Scalar> out(grid);
  for (std::size_t k = 0; k < states.size(); ++k) out.set(k, Mat<Scalar>(states[k]));
  return {std::move(out).finish(), blew_up, abort_node};
}

template <typename Scalar>
bool exceeds(const Vec<Scalar>& v, double bound) {
  return !(static_cast<double>(max_abs(v)) <= bound);
}

}  // namespace detail

// dY/dt = V(t) f(t, U(t) Y) with U, V held at their left-node values over each
// step; explicit midpoint rule on the grid of U.
template <typename Scalar>
StatePath<Scalar> solve_rde(const MatrixPath<Scalar>& u, const MatrixPath<Scalar>& v,
                            const std::function<Vec<Scalar>(double, const Vec<Scalar>&)>& f,
                            const Vec<Scalar>& x0, double blowup_bound = kDefaultBlowupBound) {
  using Vector = Vec<Scalar>;
  require_same_grid(u, v, "solve_rde");
  if (u.rows() != x0.size() || u.cols() != x0.size()) throw ShapeError("solve_rde: U and x0 do not conform");
  const auto& grid = u.grid();
  std::vector<Vector> ys(grid.size(), Vector::Constant(x0.size(), std::numeric_limits<Scalar>::quiet_NaN()));
  Vector y = x0;
  ys[0] = y;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const auto h = static_cast<Scalar>(grid.dt(k));
    const auto& uk = u.value(k);
    const auto& vk = v.value(k);
    auto rhs = [&](double s, const Vector& state) -> Vector {
      return vk * detail::checked_field(f, s, Vector(uk * state));
    };
    const Vector k1 = rhs(t, y);
    const Vector mid = y + (h / Scalar(2)) * k1;
    y = y + h * rhs(t + grid.dt(k) / 2, mid);
    if (detail::exceeds(y, blowup_bound) || detail::exceeds(Vector(uk * y), blowup_bound))
      return detail::state_path(u.grid_ptr(), std::move(ys), true, k + 1);
    ys[k + 1] = y;
  }
  return detail::state_path(u.grid_ptr(), std::move(ys), false, 0);
}

// X = U Y, nodewise.
template <typename Scalar>
MatrixPath<Scalar> reconstruct(const MatrixPath<Scalar>& u, const MatrixPath<Scalar>& y) {
  require_same_grid(u, y, "reconstruct");
  return u * y;
}

// Euler-Maruyama on the original equation; the independent reference route.
template <typename Scalar>
StatePath<Scalar> solve_nonlinear_direct(const NonlinearProblem<Scalar>& p, const MatrixPath<Scalar>& brownian,
                                         double blowup_bound = kDefaultBlowupBound) {
  using Vector = Vec<Scalar>;
  using Matrix = Mat<Scalar>;
  p.validate();
  if (brownian.rows() != p.n || brownian.cols() != 1)
    throw ShapeError("solve_nonlinear_direct: Brownian path must have n components");
  const auto& grid = brownian.grid();
  std::vector<Vector> xs(grid.size(), Vector::Constant(p.n, std::numeric_limits<Scalar>::quiet_NaN()));
  Vector x = p.x0;
  xs[0] = x;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    Vector next = x + detail::checked_field(p.f, t, x) * static_cast<Scalar>(grid.dt(k));
    if (p.C) {
      const Matrix c = p.C(t);
      if (c.rows() != p.n || c.cols() != p.n) throw ShapeError("solve_nonlinear_direct: C(t) has the wrong shape");
      const Vector db = brownian.value(k + 1).col(0) - brownian.value(k).col(0);
      next += c * (x.cwiseProduct(db));
    }
    x = next;
    if (detail::exceeds(x, blowup_bound)) return detail::state_path(brownian.grid_ptr(), std::move(xs), true, k + 1);
    xs[k + 1] = x;
  }
  return detail::state_path(brownian.grid_ptr(), std::move(xs), false, 0);
}

template <typename Scalar = double>
struct ReductionResult {
  ExponentialPair<Scalar> pair;
  StatePath<Scalar> Y;
  MatrixPath<Scalar> X;
};

// Full pathwise pipeline: L from C and B, (U, V) from the W-transform, the RDE
// for Y, then X = U Y.
template <typename Scalar>
ReductionResult<Scalar> solve_by_reduction(const NonlinearProblem<Scalar>& p, const MatrixPath<Scalar>& brownian,
                                           double blowup_bound = kDefaultBlowupBound) {
  p.validate();
  auto driver = build_L(p.C, brownian);
  auto pair = exponential_inverse(driver.L, driver.spec);
  auto y = solve_rde(pair.U, pair.V, p.f, p.x0, blowup_bound);
  auto x = reconstruct(pair.U, y.path);
  return {std::move(pair), std::move(y), std::move(x)};
}

}  // namespace stochex
