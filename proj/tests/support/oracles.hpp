// Independent reference implementations and random instance generators shared
// by the unit suites and the acceptance runner. Everything here is written
// the slow, literal way on purpose.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfgpipe/merge.hpp"
#include "mfgpipe/random.hpp"
#include "mfgpipe/table.hpp"

namespace oracle {

using mfg::Column;
using mfg::Table;
using mfg::Timestamp;

// ------------------------------------------------------------ as-of merge

// Row of `other` chosen for each main row by scanning every other row.
inline std::vector<std::optional<std::size_t>> asof_matches(const Table& main, const Table& other,
                                                            const mfg::MergeSpec& spec) {
  std::vector<std::optional<std::size_t>> out(main.row_count());
  const Column& mt = main.column(spec.main_time);
  const Column& ot = other.column(spec.other_time);
  for (std::size_t i = 0; i < main.row_count(); ++i) {
    bool usable = !mt.is_missing(i);
    for (const auto& k : spec.key_columns) usable = usable && !main.column(k).is_missing(i);
    if (!usable) continue;
    const Timestamp t = mt.timestamp_at(i);

    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < other.row_count(); ++j) {
      if (ot.is_missing(j)) continue;
      bool same = true;
      for (const auto& k : spec.key_columns) {
        const Column& a = main.column(k);
        const Column& b = other.column(k);
        same = same && !b.is_missing(j) && a.render(i) == b.render(j);
      }
      if (!same) continue;
      const Timestamp u = ot.timestamp_at(j);
      const Timestamp dt = u - t;
      if (spec.tolerance && std::llabs(dt) > *spec.tolerance) continue;
      switch (spec.method) {
        case mfg::MergeMethod::RollForward:
          if (dt > 0) continue;
          if (!best || u > ot.timestamp_at(*best)) best = j;
          break;
        case mfg::MergeMethod::RollBackward:
          if (dt < 0) continue;
          if (!best || u < ot.timestamp_at(*best)) best = j;
          break;
        case mfg::MergeMethod::Nearest: {
          if (!best) {
            best = j;
            break;
          }
          const Timestamp b = ot.timestamp_at(*best);
          const auto d_new = std::llabs(dt), d_old = std::llabs(b - t);
          if (d_new < d_old || (d_new == d_old && u < b)) best = j;
          break;
        }
      }
    }
    out[i] = best;
  }
  return out;
}

// Expected merged table: main's columns followed by the gathered columns.
inline Table asof_expected(const Table& main, const Table& other, const mfg::MergeSpec& spec,
                           const std::vector<std::string>& brought) {
  const auto matches = asof_matches(main, other, spec);
  std::vector<Column> cols = main.columns();
  for (const auto& name : brought) cols.push_back(other.column(name).gather(matches));
  return Table(main.name(), std::move(cols), main.row_count());
}

struct MergeInstance {
  Table main;
  Table other;
  mfg::MergeSpec spec;
  std::vector<std::string> brought;
};

// Up to 50 rows per side, up to 5 keys, times in a narrow range so ties and
// exact hits are common; other-table times are unique within each key.
inline MergeInstance random_merge_instance(mfg::Rng& rng, mfg::MergeMethod method, bool with_tolerance) {
  const std::size_t keys = 1 + rng.index(5);
  const std::size_t n_main = rng.index(51);
  const std::size_t n_other = rng.index(51);
  const Timestamp horizon = 10 + static_cast<Timestamp>(rng.index(60));

  auto key_name = [&](std::size_t k) { return "K" + std::to_string(k); };
  std::vector<std::optional<std::string>> mk(n_main);
  std::vector<Timestamp> mt(n_main);
  std::vector<std::uint8_t> mt_missing(n_main);
  std::vector<double> mv(n_main);
  for (std::size_t i = 0; i < n_main; ++i) {
    if (rng.uniform() > 0.05) mk[i] = key_name(rng.index(keys));
    mt[i] = static_cast<Timestamp>(rng.index(static_cast<std::size_t>(horizon)));
    mt_missing[i] = rng.uniform() < 0.05 ? 1 : 0;
    mv[i] = static_cast<double>(i);
  }

  std::vector<std::optional<std::string>> ok;
  std::vector<Timestamp> ot;
  std::vector<std::uint8_t> ot_missing;
  std::vector<double> ov;
  std::vector<std::uint8_t> ov_missing;
  std::vector<std::optional<std::string>> olabel;
  std::vector<std::vector<bool>> used(keys, std::vector<bool>(static_cast<std::size_t>(horizon), false));
  for (std::size_t j = 0; j < n_other; ++j) {
    const std::size_t k = rng.index(keys);
    const auto t = rng.index(static_cast<std::size_t>(horizon));
    const bool missing_key = rng.uniform() < 0.05;
    const bool missing_time = rng.uniform() < 0.05;
    if (!missing_key && !missing_time) {
      if (used[k][t]) continue;
      used[k][t] = true;
    }
    ok.push_back(missing_key ? std::nullopt : std::optional<std::string>(key_name(k)));
    ot.push_back(static_cast<Timestamp>(t));
    ot_missing.push_back(missing_time ? 1 : 0);
    ov.push_back(rng.normal());
    ov_missing.push_back(rng.uniform() < 0.1 ? 1 : 0);
    olabel.push_back(rng.uniform() < 0.1 ? std::nullopt : std::optional<std::string>("L" + std::to_string(rng.index(3))));
  }

  MergeInstance inst{
      Table("main", {Column::categorical("key", mk), Column::timestamp("t", mt, mt_missing), Column::numeric("row", mv)},
            n_main),
      Table("other",
            {Column::categorical("key", ok), Column::timestamp("time", ot, ot_missing),
             Column::numeric("value", ov, ov_missing), Column::categorical("label", olabel)},
            ok.size()),
      {},
      {"value", "label"}};
  inst.spec.key_columns = {"key"};
  inst.spec.main_time = "t";
  inst.spec.other_time = "time";
  inst.spec.method = method;
  if (with_tolerance) inst.spec.tolerance = static_cast<Timestamp>(rng.index(8));
  return inst;
}

// ------------------------------------------------------------ AUC

// Fraction of (positive, negative) pairs the positive wins, ties counted 1/2.
inline double pair_count_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / pairs;
}

// ------------------------------------------------------------ regression

// OLS with intercept through the normal equations (X'X)^-1 X'y.
inline Eigen::VectorXd normal_equation_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  return (A.transpose() * A).ldlt().solve(A.transpose() * y);  // [intercept, coefficients...]
}

// 1 / (1 - R^2) from a normal-equation regression of column j on the rest.
inline double normal_equation_vif(const Eigen::MatrixXd& X, Eigen::Index j) {
  Eigen::MatrixXd others(X.rows(), X.cols() - 1);
  for (Eigen::Index k = 0, c = 0; k < X.cols(); ++k)
    if (k != j) others.col(c++) = X.col(k);
  const Eigen::VectorXd target = X.col(j);
  const Eigen::VectorXd beta = normal_equation_fit(others, target);
  const Eigen::VectorXd fitted = (others * beta.tail(others.cols())).array() + beta(0);
  const double rss = (target - fitted).squaredNorm();
  const double tss = (target.array() - target.mean()).matrix().squaredNorm();
  return tss / rss;
}

// ------------------------------------------------------------ Mann-Whitney

// U for group 1 by counting pairs, ties 1/2.
inline double brute_force_u(const std::vector<double>& values, const std::vector<std::uint8_t>& group) {
  double u = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!group[i]) continue;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (group[j]) continue;
      if (values[i] > values[j])
        u += 1.0;
      else if (values[i] == values[j])
        u += 0.5;
    }
  }
  return u;
}

// ------------------------------------------------------------ generators

inline Eigen::MatrixXd random_matrix(mfg::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Eigen::VectorXd random_vector(mfg::Rng& rng, Eigen::Index n) { return random_matrix(rng, n, 1).col(0); }

}  // namespace oracle
