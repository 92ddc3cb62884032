#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfgpipe/error.hpp"
#include "mfgpipe/linalg.hpp"

namespace mfg {

// ------------------------------------------------------------ correlation

// Sample Pearson correlation over pairwise-complete entries (NaN = missing).
// Throws ZeroVarianceError when either side is constant on those entries.
template <class DX, class DY>
typename DX::Scalar pearson_r(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.size() != y.size()) throw ValidationError("pearson_r: length mismatch");
  Scalar sx = 0, sy = 0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (is_missing(x(i)) || is_missing(y(i))) continue;
    sx += x(i);
    sy += y(i);
    ++n;
  }
  if (n < 2) throw ValidationError("pearson_r: fewer than 2 complete pairs");
  const Scalar mx = sx / Scalar(n), my = sy / Scalar(n);
  Scalar sxx = 0, syy = 0, sxy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (is_missing(x(i)) || is_missing(y(i))) continue;
    const Scalar dx = x(i) - mx, dy = y(i) - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == Scalar(0) || syy == Scalar(0)) throw ZeroVarianceError("pearson_r: zero variance input");
  const Scalar r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

// ------------------------------------------------------------ least squares

enum class RankPolicy { Allow, RequireUnique };

template <class Scalar>
struct LinearFit {
  Vector<Scalar> coefficients;  // one per predictor column
  Scalar intercept = 0;
  Scalar rss = 0;
  Scalar r_squared = 0;  // 0 by convention when the response is constant
  Eigen::Index rank = 0;
  bool rank_deficient = false;

  template <class D>
  Vector<Scalar> predict(const Eigen::MatrixBase<D>& X) const {
    return (X * coefficients).array() + intercept;
  }
};

inline constexpr double kPivotTolerance = 1e-10;

// Ordinary least squares with an intercept. Solved on the centred design by
// column-pivoted QR; pivots below kPivotTolerance relative to the largest are
// treated as zero. Rank-deficient designs get the basic solution (zeros for
// the dropped columns) unless RankPolicy::RequireUnique is passed.
template <class DX, class DY>
LinearFit<typename DX::Scalar> least_squares_fit(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y,
                                                 RankPolicy policy = RankPolicy::Allow) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n) throw ValidationError("least_squares_fit: X and y row counts differ");
  if (n < p + 1) throw ValidationError("least_squares_fit: need n >= p + 1");
  if (X.hasNaN() || y.hasNaN()) throw ValidationError("least_squares_fit: missing values");

  LinearFit<Scalar> fit;
  const Scalar y_mean = y.mean();
  const Vector<Scalar> yc = y.array() - y_mean;
  const Scalar tss = yc.squaredNorm();

  if (p == 0) {
    fit.coefficients.resize(0);
    fit.intercept = y_mean;
  } else {
    const Vector<Scalar> x_mean = X.colwise().mean().transpose();
    const Matrix<Scalar> Xc = X.rowwise() - x_mean.transpose();
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(Xc);
    qr.setThreshold(Scalar(kPivotTolerance));
    fit.rank = qr.rank();
    fit.rank_deficient = fit.rank < p;
    if (fit.rank_deficient && policy == RankPolicy::RequireUnique)
      throw ValidationError("least_squares_fit: design is rank deficient (rank " + std::to_string(fit.rank) +
                            " < " + std::to_string(p) + ")");
    fit.coefficients = fit.rank == 0 ? Vector<Scalar>::Zero(p) : Vector<Scalar>(qr.solve(yc));
    fit.intercept = y_mean - x_mean.dot(fit.coefficients);
  }
  const Vector<Scalar> residual = y - fit.predict(X);
  fit.rss = residual.squaredNorm();
  fit.r_squared = tss > Scalar(0) ? Scalar(1) - fit.rss / tss : Scalar(0);
  return fit;
}

// ------------------------------------------------------------ distributions

// Standard normal upper tail P(Z > z).
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

inline double chi_square_sf(double statistic, double df) {
  if (statistic <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * statistic);
}

// ------------------------------------------------------------ rank tests

enum class TestKind { Pearson, MannWhitneyU, ChiSquare };

std::string_view to_string(TestKind kind);

struct AssociationResult {
  std::string variable;
  TestKind test = TestKind::Pearson;
  double statistic = 0.0;
  double p_value = 1.0;  // approximate
  bool kept = false;
  std::string detail;  // e.g. the level tested one-vs-rest
};

struct MannWhitneyDetail {
  double u1 = 0.0;  // pairs where group 1 exceeds group 0, ties count 1/2
  double u2 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  double z = 0.0;
  double p_value = 1.0;
  double statistic() const { return std::min(u1, u2); }
};

// Two-sided Mann-Whitney U with midranks, tie-corrected variance and a 0.5
// continuity correction. `group` flags membership of group 1; NaN values are
// dropped.
MannWhitneyDetail mann_whitney_detail(std::span<const double> values, std::span<const std::uint8_t> group);
AssociationResult mann_whitney_u(std::span<const double> values, std::span<const std::uint8_t> group,
                                 std::string variable = {});

struct ChiSquareDetail {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Pearson chi-square on an r x c contingency table of counts.
ChiSquareDetail chi_square_from_counts(const MatrixXd& counts);
AssociationResult chi_square_independence(std::span<const std::string> a, std::span<const std::string> b,
                                          std::string variable = {});

// ------------------------------------------------------------ VIF

inline constexpr double kVifIndividualLimit = 10.0;
inline constexpr double kVifAverageLimit = 6.0;

struct VifReport {
  std::vector<std::string> names;
  VectorXd values;  // +infinity marks exact linear dependence
  double average_vif = 0.0;  // over finite entries only
  std::size_t infinite_count = 0;
  std::vector<std::string> individual_flags;  // VIF > 10
  bool average_flag = false;                  // average > 6
  std::size_t complete_cases = 0;
};

// Applies the flag thresholds to already computed factors.
VifReport summarize_vif(std::vector<std::string> names, VectorXd values);

// VIF_j = 1 / (1 - R^2_j) regressing column j on the remaining columns.
// A zero-variance column, or one explained up to 1 - R^2 <= 1e-10, is
// reported as +infinity.
template <class D>
Vector<typename D::Scalar> variance_inflation(const Eigen::MatrixBase<D>& X) {
  using Scalar = typename D::Scalar;
  const Eigen::Index n = X.rows(), p = X.cols();
  if (p < 2) throw ValidationError("vif: need at least 2 predictors");
  if (n < p + 2) throw ValidationError("vif: need at least p + 2 complete cases");
  Vector<Scalar> out(p);
  Matrix<Scalar> others(n, p - 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0, c = 0; k < p; ++k)
      if (k != j) others.col(c++) = X.col(k);
    const Vector<Scalar> target = X.col(j);
    const Scalar tss = (target.array() - target.mean()).matrix().squaredNorm();
    if (tss == Scalar(0)) {
      out(j) = std::numeric_limits<Scalar>::infinity();
      continue;
    }
    const auto fit = least_squares_fit(others, target);
    const Scalar unexplained = fit.rss / tss;
    out(j) = unexplained <= Scalar(1e-10) ? std::numeric_limits<Scalar>::infinity()
                                                  : std::max(Scalar(1), Scalar(1) / unexplained);
  }
  return out;
}

}  // namespace mfg
