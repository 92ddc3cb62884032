#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mfgpipe/linalg.hpp"
#include "mfgpipe/stats.hpp"
#include "mfgpipe/table.hpp"

namespace mfg {

// Regularly indexed observations; NaN marks a missing value.
struct Series {
  std::vector<Timestamp> timestamps;  // strictly increasing
  VectorXd values;

  Series() = default;
  Series(std::vector<Timestamp> timestamps, VectorXd values);
  // Timestamps 0, 1, 2, ...
  static Series indexed(VectorXd values);

  Eigen::Index size() const noexcept { return values.size(); }
  Series with_values(VectorXd v) const;
};

// Series from a numeric column, ordered by `time_column` when given.
Series series_from_table(const Table& table, const std::string& value_column, const std::string& time_column = {});

// Centred mean over an odd window. The (window-1)/2 entries at each end, and
// any output whose window touches a missing input, are NaN.
Series moving_average(const Series& series, Eigen::Index window);

struct DetrendResult {
  Series residual;
  LinearFit<double> fit;  // value on observation index
};

DetrendResult detrend_linear(const Series& series);

struct Decomposition {
  Series trend;     // NaN outside valid range
  Series seasonal;  // defined everywhere, sums to zero over one period
  Series residual;  // NaN outside valid range
  Eigen::Index period = 0;
  Eigen::Index valid_begin = 0;  // trend defined on [valid_begin, valid_end)
  Eigen::Index valid_end = 0;
};

// Classical additive decomposition. Trend is a centred moving average of
// width `period`, or the 2 x period average (half-weight ends) when period is
// even; seasonal is the centred per-phase mean of value - trend.
Decomposition decompose_additive(const Series& series, Eigen::Index period);

}  // namespace mfg
