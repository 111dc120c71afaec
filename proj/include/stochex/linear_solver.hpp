#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>

#include "stochex/exponential.hpp"

namespace stochex {

// X(t) = H(t) + int_0^t (dL(s)) X(s-) with L n x n and H n x m.
// H needs a spec only for the semimartingale routes (Jacod, continuous).
template <typename Scalar = double>
struct LinearProblem {
  MatrixPath<Scalar> L;
  DriverSpec<Scalar> spec_L;
  MatrixPath<Scalar> H;
  std::optional<DriverSpec<Scalar>> spec_H;

  void validate() const {
    if (L.rows() != L.cols()) throw ShapeError("LinearProblem: L is not square");
    if (L.cols() != H.rows()) throw ShapeError("LinearProblem: H has the wrong number of rows");
    require_same_grid(L, H, "LinearProblem");
    if (spec_L.rows != L.rows() || spec_L.cols != L.cols())
      throw ShapeError("LinearProblem: spec of L has the wrong shape");
    if (spec_H && (spec_H->rows != H.rows() || spec_H->cols != H.cols()))
      throw ShapeError("LinearProblem: spec of H has the wrong shape");
  }
};

enum class Method { kDirect, kTheorem21, kJacod, kContinuous };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::kDirect: return "direct";
    case Method::kTheorem21: return "theorem21";
    case Method::kJacod: return "jacod";
    case Method::kContinuous: return "continuous";
  }
  return "?";
}

struct SolveDiagnostics {
  double invertibility_margin = 1.0;
  double max_condition_U = 1.0;  // 2-norm condition number, 1 when U is not formed
  bool conditioning_warning = false;
};

template <typename Scalar = double>
struct SolveReport {
  MatrixPath<Scalar> X;
  Method method;
  double residual = 0.0;
  SolveDiagnostics diagnostics;
};

// sup_t || X(t) - H(t) - int_0^t (dL) X(s-) || using the same discrete integral
// as solve_direct.
template <typename Scalar>
double residual(const LinearProblem<Scalar>& p, const MatrixPath<Scalar>& x) {
  if (x.rows() != p.H.rows() || x.cols() != p.H.cols()) throw ShapeError("residual: X has the wrong shape");
  require_same_grid(x, p.H, "residual");
  const auto integral = integrate_left(p.L, x);
  double r = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    r = std::max(r, static_cast<double>(max_abs(x.value(k) - p.H.value(k) - integral.value(k))));
  return r;
}

namespace detail {

template <typename Scalar>
double max_condition(const MatrixPath<Scalar>& u) {
  double worst = 1.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    Eigen::JacobiSVD<Mat<Scalar>> svd(u.value(k));
    const auto& s = svd.singularValues();
    const double lo = static_cast<double>(s(s.size() - 1));
    worst = std::max(worst, lo > 0.0 ? static_cast<double>(s(0)) / lo : std::numeric_limits<double>::infinity());
  }
  return worst;
}

template <typename Scalar>
SolveReport<Scalar> finish_report(const LinearProblem<Scalar>& p, MatrixPath<Scalar> x, Method m,
                                  SolveDiagnostics diag) {
  const double r = residual(p, x);
  return {std::move(x), m, r, diag};
}

template <typename Scalar>
SolveDiagnostics pair_diagnostics(const ExponentialPair<Scalar>& pair) {
  return {pair.invertibility_margin, max_condition(pair.U), pair.conditioning_warning};
}

template <typename Scalar>
const DriverSpec<Scalar>& require_spec_H(const LinearProblem<Scalar>& p, const char* who) {
  if (!p.spec_H)
    throw std::invalid_argument(std::string(who) +
                                ": H has no driver spec; this route needs a semimartingale H");
  return *p.spec_H;
}

}  // namespace detail

// Forward recursion of the discrete equation. Its residual is zero up to
// rounding by construction.
template <typename Scalar>
SolveReport<Scalar> solve_direct(const LinearProblem<Scalar>& p) {
  using Matrix = Mat<Scalar>;
  p.validate();
  const double margin = check_invertibility(p.L);
  if (margin < kSingularJumpThreshold)
    throw NumericalError("solve_direct: I + dL is singular (|det| = " + std::to_string(margin) + ")");
  const auto& grid = p.L.grid();
  PathBuilder<Scalar> out(p.L.grid_ptr());
  Matrix integral = Matrix::Zero(p.H.rows(), p.H.cols());
  Matrix x = p.H.value(0);
  out.set(0, x);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    integral.noalias() += p.L.continuous_increment(k) * x;
    if (grid.is_jump(k + 1)) {
      Matrix left = p.H.left(k + 1) + integral;
      integral.noalias() += p.L.jump(k + 1) * left;
      x = p.H.value(k + 1) + integral;
      out.set(k + 1, std::move(left), x);
    } else {
      x = p.H.value(k + 1) + integral;
      out.set(k + 1, x);
    }
  }
  return detail::finish_report(p, std::move(out).finish(), Method::kDirect,
                               SolveDiagnostics{margin, 1.0, false});
}

// X = H - U int (dV) H(s-) with U = E(L), V = E(L)^{-1}. H may be any cadlag path.
template <typename Scalar>
SolveReport<Scalar> solve_theorem21(const LinearProblem<Scalar>& p) {
  p.validate();
  const auto pair = exponential_inverse(p.L, p.spec_L);
  const auto x = p.H - pair.U * integrate_left(pair.V, p.H);
  return detail::finish_report(p, x, Method::kTheorem21, detail::pair_diagnostics(pair));
}

// G = H - <L^c,H^c> - sum (I + dL)^{-1} dL dH.
template <typename Scalar>
MatrixPath<Scalar> jacod_G(const LinearProblem<Scalar>& p) {
  using Matrix = Mat<Scalar>;
  p.validate();
  const auto& spec_H = detail::require_spec_H(p, "jacod_G");
  const auto cont = analytic_bracket(p.spec_L, spec_H, p.L, p.H).continuous;
  const auto& grid = p.L.grid();
  const auto n = p.L.rows();
  PathBuilder<Scalar> out(p.L.grid_ptr());
  Matrix jump_sum = Matrix::Zero(p.H.rows(), p.H.cols());
  out.set(0, Matrix(p.H.value(0) - cont.value(0)));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid.is_jump(k)) {
      const Matrix dl = p.L.jump(k);
      if (jump_determinant_margin<Scalar>(dl) < kSingularJumpThreshold)
        throw NumericalError("jacod_G: I + dL is singular at t = " + std::to_string(grid[k]));
      Matrix left = p.H.left(k) - cont.value(k) - jump_sum;
      jump_sum += (Matrix::Identity(n, n) + dl).partialPivLu().solve(dl * p.H.jump(k));
      out.set(k, std::move(left), Matrix(p.H.value(k) - cont.value(k) - jump_sum));
    } else {
      out.set(k, Matrix(p.H.value(k) - cont.value(k) - jump_sum));
    }
  }
  return std::move(out).finish();
}

// H + [W,H] with the continuous part of [W,H] from the specs (W^c = -L^c) and
// the jump part from the realized jumps of W and H. Equals jacod_G.
template <typename Scalar>
MatrixPath<Scalar> g_from_leandre(const LinearProblem<Scalar>& p) {
  p.validate();
  const auto& spec_H = detail::require_spec_H(p, "g_from_leandre");
  const auto w = leandre_W(p.L, p.spec_L);
  DriverSpec<Scalar> spec_W = p.spec_L;
  spec_W.drift = nullptr;
  spec_W.jumps = NoJumps<Scalar>{};
  for (auto& s : spec_W.diffusion)
    if (s) s = [f = s](double t) -> Mat<Scalar> { return -f(t); };
  return p.H + analytic_bracket(spec_W, spec_H, w, p.H).total;
}

// X = U { H(0) + int V(s-) dG }.
template <typename Scalar>
SolveReport<Scalar> solve_jacod(const LinearProblem<Scalar>& p) {
  p.validate();
  detail::require_spec_H(p, "solve_jacod");
  const auto pair = exponential_inverse(p.L, p.spec_L);
  const auto g = jacod_G(p);
  const auto h0 = MatrixPath<Scalar>::constant(p.L.grid_ptr(), p.H.value(0));
  const auto x = pair.U * (h0 + integrate_right(pair.V, g));
  return detail::finish_report(p, x, Method::kJacod, detail::pair_diagnostics(pair));
}

// Continuous L and H: X = U { H(0) + int V (dH - d[L,H]) } with [L,H] from the specs.
template <typename Scalar>
SolveReport<Scalar> solve_continuous(const LinearProblem<Scalar>& p) {
  using Matrix = Mat<Scalar>;
  p.validate();
  const auto& spec_H = detail::require_spec_H(p, "solve_continuous");
  if (p.L.has_jumps() || p.H.has_jumps())
    throw std::invalid_argument("solve_continuous: L and H must be continuous");
  const auto pair = exponential_inverse(p.L, p.spec_L);
  const auto bracket = analytic_bracket(p.spec_L, spec_H, p.L, p.H).continuous;
  const auto& grid = p.L.grid();
  PathBuilder<Scalar> out(p.L.grid_ptr());
  Matrix inner = p.H.value(0);
  out.set(0, Matrix(pair.U.value(0) * inner));
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const Matrix dh = p.H.value(k + 1) - p.H.value(k);
    const Matrix dlh = bracket.value(k + 1) - bracket.value(k);
    inner.noalias() += pair.V.value(k) * (dh - dlh);
    out.set(k + 1, Matrix(pair.U.value(k + 1) * inner));
  }
  return detail::finish_report(p, std::move(out).finish(), Method::kContinuous, detail::pair_diagnostics(pair));
}

template <typename Scalar>
SolveReport<Scalar> solve(const LinearProblem<Scalar>& p, Method m) {
  switch (m) {
    case Method::kDirect: return solve_direct(p);
    case Method::kTheorem21: return solve_theorem21(p);
    case Method::kJacod: return solve_jacod(p);
    case Method::kContinuous: return solve_continuous(p);
  }
  throw std::invalid_argument("solve: unknown method");
}

// ---------------------------------------------------------------------------
// Scalar specializations, evaluated with the closed-form exponential.

// G = H - <H^c,Z^c> - sum dH dZ / (1 + dZ).
template <typename Scalar>
MatrixPath<Scalar> scalar_G(const MatrixPath<Scalar>& z, const DriverSpec<Scalar>& spec_z,
                            const MatrixPath<Scalar>& h, const DriverSpec<Scalar>& spec_h) {
  using std::abs;
  if (z.rows() != 1 || z.cols() != 1 || h.rows() != 1 || h.cols() != 1)
    throw ShapeError("scalar_G: paths must be 1 x 1");
  const auto cont = analytic_bracket(spec_h, spec_z, h, z).continuous;
  const auto& grid = z.grid();
  auto node = [](Scalar v) { return Mat<Scalar>::Constant(1, 1, v); };
  PathBuilder<Scalar> out(z.grid_ptr());
  Scalar jump_sum(0);
  out.set(0, node(h.value(0)(0, 0) - cont.value(0)(0, 0)));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const Scalar base = h.value(k)(0, 0) - cont.value(k)(0, 0);
    if (grid.is_jump(k)) {
      const Scalar dz = z.jump(k)(0, 0);
      if (abs(Scalar(1) + dz) < Scalar(kSingularJumpThreshold))
        throw NumericalError("scalar_G: jump of -1 at t = " + std::to_string(grid[k]));
      const Scalar left = h.left(k)(0, 0) - cont.value(k)(0, 0) - jump_sum;
      jump_sum += h.jump(k)(0, 0) * dz / (Scalar(1) + dz);
      out.set(k, node(left), node(base - jump_sum));
    } else {
      out.set(k, node(base - jump_sum));
    }
  }
  return std::move(out).finish();
}

// X = E(Z) { H(0) + int E(Z)(s-)^{-1} dG } for 1 x 1 Z and H.
template <typename Scalar>
MatrixPath<Scalar> solve_scalar_yoeurp_yor(const MatrixPath<Scalar>& z, const DriverSpec<Scalar>& spec_z,
                                           const MatrixPath<Scalar>& h, const DriverSpec<Scalar>& spec_h) {
  const auto e = scalar_doleans(z, spec_z);
  const auto e_inv = map_nodes(e, [](const Mat<Scalar>& m) -> Mat<Scalar> { return m.cwiseInverse(); });
  const auto g = scalar_G(z, spec_z, h, spec_h);
  const auto h0 = MatrixPath<Scalar>::constant(z.grid_ptr(), h.value(0));
  return e * (h0 + integrate_right(e_inv, g));
}

// X = H - E(Z) int H(s-) d(E(Z)^{-1}) for 1 x 1 Z and any cadlag H.
template <typename Scalar>
MatrixPath<Scalar> solve_scalar_jaschke(const MatrixPath<Scalar>& z, const DriverSpec<Scalar>& spec_z,
                                        const MatrixPath<Scalar>& h) {
  const auto e = scalar_doleans(z, spec_z);
  const auto e_inv = map_nodes(e, [](const Mat<Scalar>& m) -> Mat<Scalar> { return m.cwiseInverse(); });
  return h - e * integrate_right(h, e_inv);
}

}  // namespace stochex
