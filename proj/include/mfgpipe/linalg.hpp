#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace mfg {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Missing numeric cells travel through the numeric kernels as quiet NaN.
template <class Scalar = double>
constexpr Scalar missing_value() noexcept {
  return std::numeric_limits<Scalar>::quiet_NaN();
}

template <class Scalar>
bool is_missing(Scalar v) noexcept {
  return std::isnan(v);
}

}  // namespace mfg
