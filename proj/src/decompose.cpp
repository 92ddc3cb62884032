#include "mfgpipe/decompose.hpp"

#include <algorithm>
#include <numeric>

#include "mfgpipe/error.hpp"

namespace mfg {

Series::Series(std::vector<Timestamp> ts, VectorXd v) : timestamps(std::move(ts)), values(std::move(v)) {
  if (static_cast<Eigen::Index>(timestamps.size()) != values.size())
    throw ValidationError("series: timestamps and values differ in length");
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] <= timestamps[i - 1]) throw ValidationError("series: timestamps must be strictly increasing");
}

Series Series::indexed(VectorXd v) {
  std::vector<Timestamp> ts(static_cast<std::size_t>(v.size()));
  std::iota(ts.begin(), ts.end(), Timestamp{0});
  return Series(std::move(ts), std::move(v));
}

Series Series::with_values(VectorXd v) const { return Series(timestamps, std::move(v)); }

Series series_from_table(const Table& table, const std::string& value_column, const std::string& time_column) {
  const Column& value = table.column(value_column);
  if (value.kind() != ColumnKind::Numeric) throw ValidationError("column '" + value_column + "' is not numeric");
  if (time_column.empty()) return Series::indexed(value.to_vector());

  const Column& time = table.column(time_column);
  if (time.kind() != ColumnKind::Timestamp) throw ValidationError("column '" + time_column + "' is not a timestamp");
  std::vector<std::size_t> order(table.row_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i : order)
    if (time.is_missing(i)) throw ValidationError("series: missing timestamp in row " + std::to_string(i + 1));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return time.timestamp_at(a) < time.timestamp_at(b); });
  std::vector<Timestamp> ts;
  VectorXd v(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    ts.push_back(time.timestamp_at(order[i]));
    v(static_cast<Eigen::Index>(i)) = value.as_double(order[i]);
  }
  return Series(std::move(ts), std::move(v));
}

namespace {

// Weighted centred filter; NaN wherever the window is incomplete.
VectorXd centred_filter(const VectorXd& x, const VectorXd& weights) {
  const Eigen::Index n = x.size(), w = weights.size(), half = (w - 1) / 2;
  VectorXd out = VectorXd::Constant(n, missing_value());
  for (Eigen::Index i = half; i + half < n; ++i) {
    const auto window = x.segment(i - half, w);
    if (window.hasNaN()) continue;
    out(i) = window.dot(weights);
  }
  return out;
}

}  // namespace

Series moving_average(const Series& series, Eigen::Index window) {
  if (window < 1 || window % 2 == 0) throw ValidationError("moving_average: window must be odd and positive");
  if (window > series.size()) throw ValidationError("moving_average: window longer than series");
  return series.with_values(centred_filter(series.values, VectorXd::Constant(window, 1.0 / double(window))));
}

DetrendResult detrend_linear(const Series& series) {
  std::vector<Eigen::Index> observed;
  for (Eigen::Index i = 0; i < series.size(); ++i)
    if (!is_missing(series.values(i))) observed.push_back(i);
  if (observed.size() < 3) throw ValidationError("detrend_linear: need at least 3 observed points");

  MatrixXd X(static_cast<Eigen::Index>(observed.size()), 1);
  VectorXd y(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    X(k, 0) = double(observed[static_cast<std::size_t>(k)]);
    y(k) = series.values(observed[static_cast<std::size_t>(k)]);
  }
  auto fit = least_squares_fit(X, y);
  VectorXd residual(series.size());
  for (Eigen::Index i = 0; i < series.size(); ++i)
    residual(i) = series.values(i) - (fit.intercept + fit.coefficients(0) * double(i));
  return {series.with_values(std::move(residual)), std::move(fit)};
}

Decomposition decompose_additive(const Series& series, Eigen::Index period) {
  const Eigen::Index n = series.size();
  if (period < 2) throw ValidationError("decompose_additive: period must be >= 2");
  if (n < 2 * period) throw ValidationError("decompose_additive: series shorter than two periods");
  const Eigen::Index missing = series.values.array().isNaN().count();
  if (10 * missing > n) throw ValidationError("decompose_additive: more than 10% of values missing");

  VectorXd weights;
  if (period % 2 == 1) {
    weights = VectorXd::Constant(period, 1.0 / double(period));
  } else {
    weights = VectorXd::Constant(period + 1, 1.0 / double(period));
    weights(0) = weights(period) = 0.5 / double(period);
  }
  const Eigen::Index half = (weights.size() - 1) / 2;

  Decomposition d;
  d.period = period;
  d.valid_begin = half;
  d.valid_end = n - half;
  const VectorXd trend = centred_filter(series.values, weights);

  VectorXd phase_sum = VectorXd::Zero(period);
  VectorXd phase_count = VectorXd::Zero(period);
  for (Eigen::Index i = d.valid_begin; i < d.valid_end; ++i) {
    const double detrended = series.values(i) - trend(i);
    if (is_missing(detrended)) continue;
    phase_sum(i % period) += detrended;
    phase_count(i % period) += 1.0;
  }
  if ((phase_count.array() == 0.0).any())
    throw ValidationError("decompose_additive: a seasonal phase has no complete observation");
  VectorXd phase_mean = phase_sum.cwiseQuotient(phase_count);
  phase_mean.array() -= phase_mean.mean();

  VectorXd seasonal(n), residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    seasonal(i) = phase_mean(i % period);
    residual(i) = series.values(i) - trend(i) - seasonal(i);
  }
  d.trend = series.with_values(trend);
  d.seasonal = series.with_values(std::move(seasonal));
  d.residual = series.with_values(std::move(residual));
  return d;
}

}  // namespace mfg
