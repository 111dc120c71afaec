#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochex/brownian.hpp"
#include "stochex/rng.hpp"
#include "stochex/time_grid.hpp"
#include "stochex/types.hpp"

namespace stochex {

// Cadlag matrix-valued path on a TimeGrid. Node k carries the left limit
// X(t_k-) and the value X(t_k); the two differ only at flagged nodes.
template <typename Scalar = double>
class MatrixPath {
 public:
  using Matrix = Mat<Scalar>;

  MatrixPath(GridPtr grid, std::vector<Matrix> left_values, std::vector<Matrix> values)
      : grid_(std::move(grid)), left_(std::move(left_values)), values_(std::move(values)) {
    if (!grid_) throw ShapeError("MatrixPath: null grid");
    if (values_.size() != grid_->size() || left_.size() != grid_->size())
      throw ShapeError("MatrixPath: one value per grid node required");
    rows_ = values_.front().rows();
    cols_ = values_.front().cols();
    if (rows_ <= 0 || cols_ <= 0) throw ShapeError("MatrixPath: empty matrices");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (values_[k].rows() != rows_ || values_[k].cols() != cols_ || left_[k].rows() != rows_ ||
          left_[k].cols() != cols_)
        throw ShapeError("MatrixPath: inconsistent matrix dimensions");
      if (!grid_->is_jump(k) && !same_entries(left_[k], values_[k]))
        throw ShapeError("MatrixPath: left limit differs from value at unflagged node " +
                         std::to_string(k));
    }
  }

  static MatrixPath constant(GridPtr grid, const Matrix& m) {
    std::vector<Matrix> v(grid->size(), m);
    return MatrixPath(grid, v, v);
  }
  static MatrixPath zero(GridPtr grid, Eigen::Index rows, Eigen::Index cols) {
    return constant(std::move(grid), Matrix::Zero(rows, cols));
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  const TimeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  const Matrix& value(std::size_t k) const { return values_[k]; }
  const Matrix& left(std::size_t k) const { return left_[k]; }
  Matrix jump(std::size_t k) const { return values_[k] - left_[k]; }
  const Matrix& back() const { return values_.back(); }

  // Increment over (t_k, t_{k+1}) excluding the jump at t_{k+1}.
  Matrix continuous_increment(std::size_t k) const { return left_[k + 1] - values_[k]; }

  bool has_jumps() const {
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (grid_->is_jump(k) && !same_entries(left_[k], values_[k])) return true;
    return false;
  }

 private:
  // Entrywise equality with NaN == NaN (aborted state paths are NaN-filled).
  static bool same_entries(const Matrix& a, const Matrix& b) {
    return ((a.array() == b.array()) || (a.array().isNaN() && b.array().isNaN())).all();
  }

  GridPtr grid_;
  std::vector<Matrix> left_;
  std::vector<Matrix> values_;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
};

using MatrixPathd = MatrixPath<double>;

// Accumulates node values; at unflagged nodes the left limit is the value.
template <typename Scalar = double>
class PathBuilder {
 public:
  using Matrix = Mat<Scalar>;

  explicit PathBuilder(GridPtr grid) : grid_(std::move(grid)), left_(grid_->size()), values_(grid_->size()) {}

  void set(std::size_t k, Matrix left, Matrix value) {
    left_[k] = std::move(left);
    values_[k] = std::move(value);
  }
  void set(std::size_t k, Matrix value) {
    left_[k] = value;
    values_[k] = std::move(value);
  }

  MatrixPath<Scalar> finish() && {
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (!grid_->is_jump(k)) left_[k] = values_[k];
    return MatrixPath<Scalar>(grid_, std::move(left_), std::move(values_));
  }

 private:
  GridPtr grid_;
  std::vector<Matrix> left_;
  std::vector<Matrix> values_;
};

inline bool same_grid(const TimeGrid& a, const TimeGrid& b) { return &a == &b || a == b; }

template <typename S1, typename S2>
void require_same_grid(const MatrixPath<S1>& a, const MatrixPath<S2>& b, const char* who) {
  if (!same_grid(a.grid(), b.grid())) throw ShapeError(std::string(who) + ": paths live on different grids");
}

// Nodewise map over (left, value) pairs of one or two paths.
template <typename Scalar, typename Fn>
MatrixPath<Scalar> map_nodes(const MatrixPath<Scalar>& a, Fn fn) {
  PathBuilder<Scalar> out(a.grid_ptr());
  for (std::size_t k = 0; k < a.size(); ++k) out.set(k, fn(a.left(k)), fn(a.value(k)));
  return std::move(out).finish();
}

template <typename Scalar, typename Fn>
MatrixPath<Scalar> map_nodes(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b, Fn fn) {
  require_same_grid(a, b, "map_nodes");
  PathBuilder<Scalar> out(a.grid_ptr());
  for (std::size_t k = 0; k < a.size(); ++k)
    out.set(k, fn(a.left(k), b.left(k)), fn(a.value(k), b.value(k)));
  return std::move(out).finish();
}

template <typename Scalar>
MatrixPath<Scalar> operator+(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  return map_nodes(a, b, [](const auto& x, const auto& y) -> Mat<Scalar> { return x + y; });
}
template <typename Scalar>
MatrixPath<Scalar> operator-(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  return map_nodes(a, b, [](const auto& x, const auto& y) -> Mat<Scalar> { return x - y; });
}
// Nodewise matrix product.
template <typename Scalar>
MatrixPath<Scalar> operator*(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  if (a.cols() != b.rows()) throw ShapeError("path product: inner dimensions differ");
  return map_nodes(a, b, [](const auto& x, const auto& y) -> Mat<Scalar> { return x * y; });
}
template <typename Scalar>
MatrixPath<Scalar> operator*(Scalar alpha, const MatrixPath<Scalar>& a) {
  return map_nodes(a, [alpha](const auto& x) -> Mat<Scalar> { return alpha * x; });
}
template <typename Scalar>
MatrixPath<Scalar> transpose(const MatrixPath<Scalar>& a) {
  return map_nodes(a, [](const auto& x) -> Mat<Scalar> { return x.transpose(); });
}

// sup over nodes (values and left limits) of the Chebyshev norm.
template <typename Scalar>
auto sup_norm(const MatrixPath<Scalar>& a) {
  typename Eigen::NumTraits<Scalar>::Real m(0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    using std::max;
    m = max(m, max_abs(a.value(k)));
    m = max(m, max_abs(a.left(k)));
  }
  return m;
}

template <typename Scalar>
auto sup_distance(const MatrixPath<Scalar>& a, const MatrixPath<Scalar>& b) {
  require_same_grid(a, b, "sup_distance");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sup_distance: shapes differ");
  typename Eigen::NumTraits<Scalar>::Real m(0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    using std::max;
    m = max(m, max_abs(a.value(k) - b.value(k)));
    m = max(m, max_abs(a.left(k) - b.left(k)));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Driver specifications

template <typename Scalar = double>
struct NoJumps {};

template <typename Scalar = double>
struct ExplicitJumps {
  std::vector<std::pair<double, Mat<Scalar>>> jumps;
};

// Finite-activity compound Poisson law: arrivals at `rate` per unit time,
// iid sizes drawn by `size`.
template <typename Scalar = double>
struct CompoundPoisson {
  double rate = 0.0;
  std::function<Mat<Scalar>(std::mt19937_64&)> size;
};

template <typename Scalar = double>
using JumpLaw = std::variant<NoJumps<Scalar>, ExplicitJumps<Scalar>, CompoundPoisson<Scalar>>;

// Semimartingale of the form
//   Z(t) = int_0^t a(s) ds + sum_r int_0^t sigma_r(s) dB^r(s) + jumps.
// An empty integrand is identically zero. `diffusion` is either empty or has
// one entry per Brownian component.
template <typename Scalar = double>
struct DriverSpec {
  using Matrix = Mat<Scalar>;
  using Integrand = std::function<Matrix(double)>;

  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  Integrand drift;
  std::vector<Integrand> diffusion;
  JumpLaw<Scalar> jumps = NoJumps<Scalar>{};
  // Reject realized jumps J with |det(I + J)| below kSingularJumpThreshold.
  bool exponential_base = false;

  std::size_t brownian_dim() const { return diffusion.size(); }

  bool has_diffusion() const {
    for (const auto& s : diffusion)
      if (s) return true;
    return false;
  }

  bool has_jump_law() const {
    if (std::holds_alternative<NoJumps<Scalar>>(jumps)) return false;
    if (auto* e = std::get_if<ExplicitJumps<Scalar>>(&jumps)) return !e->jumps.empty();
    return std::get<CompoundPoisson<Scalar>>(jumps).rate > 0.0;
  }

  Matrix drift_at(double t) const { return drift ? drift(t) : Matrix::Zero(rows, cols); }
  Matrix diffusion_at(std::size_t r, double t) const {
    return diffusion[r] ? diffusion[r](t) : Matrix::Zero(rows, cols);
  }

  void validate() const {
    if (rows <= 0 || cols <= 0) throw ShapeError("DriverSpec: dimensions must be positive");
    if (auto* cp = std::get_if<CompoundPoisson<Scalar>>(&jumps)) {
      if (!(cp->rate >= 0.0) || !std::isfinite(cp->rate))
        throw std::invalid_argument("DriverSpec: jump rate must be finite and nonnegative");
      if (cp->rate > 0.0 && !cp->size) throw std::invalid_argument("DriverSpec: missing jump-size sampler");
    }
    if (auto* e = std::get_if<ExplicitJumps<Scalar>>(&jumps)) {
      for (const auto& [t, j] : e->jumps)
        if (j.rows() != rows || j.cols() != cols) throw ShapeError("DriverSpec: jump has wrong shape");
    }
  }
};

using DriverSpecd = DriverSpec<double>;

// Jump times of the spec's law for the given driver seed.
template <typename Scalar>
std::vector<double> driver_jump_times(const DriverSpec<Scalar>& spec, double horizon, std::uint64_t seed) {
  if (auto* e = std::get_if<ExplicitJumps<Scalar>>(&spec.jumps)) {
    std::vector<double> t;
    for (const auto& j : e->jumps) t.push_back(j.first);
    std::sort(t.begin(), t.end());
    return t;
  }
  if (auto* cp = std::get_if<CompoundPoisson<Scalar>>(&spec.jumps))
    return realize_jump_times(cp->rate, horizon, seed);
  return {};
}

// d-dimensional Brownian motion at the grid nodes, stored as a d x 1 path.
template <typename Scalar = double>
MatrixPath<Scalar> sample_brownian(GridPtr grid, Eigen::Index d, std::uint64_t seed) {
  if (d <= 0) throw ShapeError("sample_brownian: dimension must be positive");
  const Eigen::MatrixXd values = brownian_nodes(*grid, d, seed);
  PathBuilder<Scalar> out(grid);
  for (std::size_t k = 0; k < grid->size(); ++k)
    out.set(k, Mat<Scalar>(values.col(static_cast<Eigen::Index>(k)).template cast<Scalar>()));
  return std::move(out).finish();
}

template <typename Scalar>
double jump_determinant_margin(const Mat<Scalar>& jump) {
  using std::abs;
  if (jump.rows() != jump.cols()) return 1.0;
  const Mat<Scalar> m = Mat<Scalar>::Identity(jump.rows(), jump.cols()) + jump;
  return static_cast<double>(abs(m.determinant()));
}

// Left-point Euler accumulation of the spec on the grid, plus the realized
// jumps at their flagged nodes.
template <typename Scalar>
MatrixPath<Scalar> sample_driver(const DriverSpec<Scalar>& spec, GridPtr grid,
                                 const MatrixPath<Scalar>& brownian, std::uint64_t seed) {
  using Matrix = Mat<Scalar>;
  spec.validate();
  if (!same_grid(*grid, brownian.grid())) throw ShapeError("sample_driver: Brownian path on another grid");
  const auto d = static_cast<std::size_t>(brownian.rows());
  if (!spec.diffusion.empty() && spec.diffusion.size() != d)
    throw ShapeError("sample_driver: spec has " + std::to_string(spec.diffusion.size()) +
                     " Brownian integrands, path has " + std::to_string(d) + " components");

  std::vector<Matrix> jump_at(grid->size());
  auto place = [&](double t, Matrix j) {
    auto k = grid->find_node(t);
    if (!k || !grid->is_jump(*k))
      throw ShapeError("sample_driver: jump time " + std::to_string(t) + " is not a flagged grid node");
    if (spec.exponential_base && jump_determinant_margin(j) < kSingularJumpThreshold)
      throw NumericalError("sample_driver: I + jump is singular at t = " + std::to_string(t));
    if (jump_at[*k].size() == 0)
      jump_at[*k] = std::move(j);
    else
      jump_at[*k] += j;
  };
  if (auto* e = std::get_if<ExplicitJumps<Scalar>>(&spec.jumps)) {
    for (const auto& [t, j] : e->jumps) place(t, j);
  } else if (auto* cp = std::get_if<CompoundPoisson<Scalar>>(&spec.jumps)) {
    auto sizes = make_stream(seed, Stream::kJumpSizes);
    for (double t : realize_jump_times(cp->rate, grid->horizon(), seed)) place(t, cp->size(sizes));
  }

  PathBuilder<Scalar> out(grid);
  Matrix z = Matrix::Zero(spec.rows, spec.cols);
  out.set(0, z);
  for (std::size_t k = 0; k + 1 < grid->size(); ++k) {
    const double t = (*grid)[k];
    Matrix inc = spec.drift_at(t) * static_cast<Scalar>(grid->dt(k));
    for (std::size_t r = 0; r < spec.diffusion.size(); ++r) {
      if (!spec.diffusion[r]) continue;
      const Scalar db = brownian.value(k + 1)(static_cast<Eigen::Index>(r), 0) -
                        brownian.value(k)(static_cast<Eigen::Index>(r), 0);
      inc += spec.diffusion[r](t) * db;
    }
    z += inc;
    if (jump_at[k + 1].size() != 0) {
      Matrix left = z;
      z += jump_at[k + 1];
      out.set(k + 1, std::move(left), z);
    } else {
      out.set(k + 1, z);
    }
  }
  return std::move(out).finish();
}

// Paths sampled from one seed on one grid, so that formulas can be compared
// on the same sample path.
template <typename Scalar = double>
struct PathBundle {
  GridPtr grid;
  MatrixPath<Scalar> brownian;
  std::map<std::string, MatrixPath<Scalar>> paths;
  std::uint64_t seed = 0;

  const MatrixPath<Scalar>& at(const std::string& name) const {
    auto it = paths.find(name);
    if (it == paths.end()) throw std::out_of_range("PathBundle: no path named " + name);
    return it->second;
  }
};

// Realizes every driver's jump times, merges them into a uniform grid, then
// samples B and each driver. Driver i uses seed derive_seed(seed, kDriver + i).
template <typename Scalar>
PathBundle<Scalar> sample_bundle(double horizon, long steps, Eigen::Index brownian_dim,
                                 const std::vector<std::pair<std::string, DriverSpec<Scalar>>>& drivers,
                                 std::uint64_t seed) {
  std::vector<std::vector<double>> times;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(Stream::kDriver) + i));
    times.push_back(driver_jump_times(drivers[i].second, horizon, seeds.back()));
  }
  const auto merged = merge_jump_times(times, 1e-12 * horizon);
  auto grid = build_grid(horizon, steps, merged);
  auto brownian = sample_brownian<Scalar>(grid, brownian_dim, seed);
  PathBundle<Scalar> bundle{grid, brownian, {}, seed};
  for (std::size_t i = 0; i < drivers.size(); ++i)
    bundle.paths.emplace(drivers[i].first, sample_driver(drivers[i].second, grid, bundle.brownian, seeds[i]));
  return bundle;
}

}  // namespace stochex
