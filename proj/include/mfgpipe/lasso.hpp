#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mfgpipe/error.hpp"
#include "mfgpipe/linalg.hpp"

namespace mfg {

struct LassoOptions {
  double tolerance = 1e-6;  // on the largest standardized coefficient change in a sweep
  int max_sweeps = 10000;
  bool throw_on_nonconvergence = true;
};

template <class Scalar>
struct LassoFit {
  Vector<Scalar> coefficients;  // original predictor scale
  Scalar intercept = 0;
  Vector<Scalar> standardized;  // coefficients on z-scored predictors
  int sweeps = 0;
  bool converged = false;
  Scalar final_change = 0;
};

// Columns centred and scaled to unit population variance; zero-variance
// columns get scale 0 and are never updated.
template <class Scalar>
struct Standardization {
  Vector<Scalar> mean;
  Vector<Scalar> scale;
  Matrix<Scalar> z;
  Scalar y_mean = 0;
  Vector<Scalar> y_centred;

  template <class DX, class DY>
  Standardization(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y) {
    const auto n = static_cast<Scalar>(X.rows());
    mean = X.colwise().mean().transpose();
    z = X.rowwise() - mean.transpose();
    scale = (z.colwise().squaredNorm().transpose() / n).cwiseSqrt();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (scale(j) > Scalar(0))
        z.col(j) /= scale(j);
      else
        z.col(j).setZero();
    }
    y_mean = y.mean();
    y_centred = y.array() - y_mean;
  }
};

// Smallest lambda at which every standardized coefficient is zero.
template <class DX, class DY>
typename DX::Scalar lasso_lambda_max(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  const Standardization<Scalar> s(X, y);
  // Same arithmetic as the first coordinate update, so lambda_max itself
  // soft-thresholds every coefficient to exactly zero.
  const auto inv_n = Scalar(1) / Scalar(X.rows());
  Scalar out = 0;
  for (Eigen::Index j = 0; j < s.z.cols(); ++j) out = std::max(out, std::abs(inv_n * s.z.col(j).dot(s.y_centred)));
  return out;
}

inline double soft_threshold(double value, double lambda) {
  if (value > lambda) return value - lambda;
  if (value < -lambda) return value + lambda;
  return 0.0;
}

// Cyclic coordinate descent on (1/2n) RSS + lambda * ||beta||_1 over
// standardized predictors and centred response.
template <class Scalar>
LassoFit<Scalar> lasso_coordinate_descent(const Standardization<Scalar>& s, Scalar lambda,
                                          const LassoOptions& options = {},
                                          const Vector<Scalar>* warm_start = nullptr) {
  if (!(lambda >= Scalar(0))) throw ValidationError("lasso: lambda must be >= 0");
  const Eigen::Index n = s.z.rows(), p = s.z.cols();
  const auto inv_n = Scalar(1) / Scalar(n);

  LassoFit<Scalar> fit;
  fit.standardized = warm_start ? *warm_start : Vector<Scalar>::Zero(p);
  Vector<Scalar> residual = s.y_centred - s.z * fit.standardized;

  for (fit.sweeps = 1; fit.sweeps <= options.max_sweeps; ++fit.sweeps) {
    Scalar max_change = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.scale(j) == Scalar(0)) continue;
      const Scalar old = fit.standardized(j);
      const Scalar rho = inv_n * s.z.col(j).dot(residual) + old;
      const Scalar updated = soft_threshold(rho, lambda);
      if (updated != old) {
        residual -= (updated - old) * s.z.col(j);
        fit.standardized(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    fit.final_change = max_change;
    if (max_change < Scalar(options.tolerance)) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    fit.sweeps = options.max_sweeps;
    if (options.throw_on_nonconvergence)
      throw ConvergenceError("lasso did not converge in " + std::to_string(options.max_sweeps) +
                                 " sweeps (last change " + std::to_string(double(fit.final_change)) + ")",
                             double(fit.final_change));
  }

  fit.coefficients.resize(p);
  for (Eigen::Index j = 0; j < p; ++j)
    fit.coefficients(j) = s.scale(j) > Scalar(0) ? fit.standardized(j) / s.scale(j) : Scalar(0);
  fit.intercept = s.y_mean - s.mean.dot(fit.coefficients);
  return fit;
}

template <class DX, class DY>
LassoFit<typename DX::Scalar> lasso_coordinate_descent(const Eigen::MatrixBase<DX>& X,
                                                       const Eigen::MatrixBase<DY>& y, typename DX::Scalar lambda,
                                                       const LassoOptions& options = {}) {
  if (X.rows() != y.size()) throw ValidationError("lasso: X and y row counts differ");
  if (X.rows() < 2) throw ValidationError("lasso: need at least 2 rows");
  if (X.hasNaN() || y.hasNaN()) throw ValidationError("lasso: missing values");
  const Standardization<typename DX::Scalar> s(X, y);
  return lasso_coordinate_descent(s, lambda, options);
}

}  // namespace mfg
