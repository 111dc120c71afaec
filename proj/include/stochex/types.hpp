#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace stochex {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatXd = Mat<double>;
using VecXd = Vec<double>;

// Shape or grid inconsistencies between inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical hypotheses violated at run time: singular I + jump,
// non-finite vector-field values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chebyshev (max-absolute-entry) norm. All residuals in the library use it.
template <typename Derived>
auto max_abs(const Eigen::MatrixBase<Derived>& m) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (m.size() == 0) return Real(0);
  return m.cwiseAbs().maxCoeff();
}

// Smallest |det(I + jump)| below which a jump is treated as singular.
inline constexpr double kSingularJumpThreshold = 1e-10;

}  // namespace stochex
