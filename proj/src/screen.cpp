#include "mfgpipe/screen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

namespace mfg {

double gamma_q(double a, double x) {
  if (a <= 0.0) throw ValidationError("gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  constexpr double eps = 1e-15;
  constexpr double tiny = 1e-300;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // Series for P(a, x).
    double ap = a, del = 1.0 / a, sum = del;
    for (int i = 0; i < 10000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * eps) break;
    }
    return std::clamp(1.0 - sum * std::exp(log_prefix), 0.0, 1.0);
  }
  // Continued fraction for Q(a, x), modified Lentz.
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return std::clamp(std::exp(log_prefix) * h, 0.0, 1.0);
}

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::Pearson: return "pearson";
    case TestKind::MannWhitneyU: return "mann_whitney_u";
    case TestKind::ChiSquare: return "chi_square";
  }
  return "?";
}

MannWhitneyDetail mann_whitney_detail(std::span<const double> values, std::span<const std::uint8_t> group) {
  if (values.size() != group.size()) throw ValidationError("mann_whitney_u: length mismatch");
  std::vector<std::pair<double, std::uint8_t>> obs;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!is_missing(values[i])) obs.emplace_back(values[i], group[i] ? 1 : 0);

  MannWhitneyDetail out;
  for (const auto& o : obs) (o.second ? out.n1 : out.n0)++;
  if (out.n0 == 0 || out.n1 == 0) throw ValidationError("mann_whitney_u: a group is empty");

  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double n = static_cast<double>(obs.size());
  double rank_sum1 = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < obs.size();) {
    std::size_t j = i;
    while (j < obs.size() && obs[j].first == obs[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (obs[k].second) rank_sum1 += midrank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double n0 = static_cast<double>(out.n0), n1 = static_cast<double>(out.n1);
  out.u1 = rank_sum1 - n1 * (n1 + 1.0) / 2.0;
  out.u2 = n0 * n1 - out.u1;

  const double mean = n0 * n1 / 2.0;
  const double variance = n0 * n1 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (variance <= 0.0) {
    out.z = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.z = std::max(0.0, (std::abs(out.u1 - mean) - 0.5) / std::sqrt(variance));
  out.p_value = std::min(1.0, 2.0 * normal_sf(out.z));
  return out;
}

AssociationResult mann_whitney_u(std::span<const double> values, std::span<const std::uint8_t> group,
                                 std::string variable) {
  const auto d = mann_whitney_detail(values, group);
  AssociationResult r;
  r.variable = std::move(variable);
  r.test = TestKind::MannWhitneyU;
  r.statistic = d.statistic();
  r.p_value = d.p_value;
  return r;
}

ChiSquareDetail chi_square_from_counts(const MatrixXd& counts) {
  if (counts.rows() < 2 || counts.cols() < 2) throw ValidationError("chi_square: each variable needs >= 2 levels");
  const VectorXd rows = counts.rowwise().sum();
  const Eigen::RowVectorXd cols = counts.colwise().sum();
  const double total = counts.sum();
  if (total <= 0.0) throw ValidationError("chi_square: empty contingency table");
  ChiSquareDetail d;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      const double expected = rows(i) * cols(j) / total;
      if (expected > 0.0) d.statistic += (counts(i, j) - expected) * (counts(i, j) - expected) / expected;
    }
  }
  d.df = static_cast<double>((counts.rows() - 1) * (counts.cols() - 1));
  d.p_value = chi_square_sf(d.statistic, d.df);
  return d;
}

AssociationResult chi_square_independence(std::span<const std::string> a, std::span<const std::string> b,
                                          std::string variable) {
  if (a.size() != b.size()) throw ValidationError("chi_square: length mismatch");
  std::map<std::string, Eigen::Index> la, lb;
  for (const auto& s : a) la.emplace(s, 0);
  for (const auto& s : b) lb.emplace(s, 0);
  if (la.size() < 2 || lb.size() < 2) throw ValidationError("chi_square: a variable has only one level");
  Eigen::Index idx = 0;
  for (auto& [k, v] : la) v = idx++;
  idx = 0;
  for (auto& [k, v] : lb) v = idx++;
  MatrixXd counts = MatrixXd::Zero(static_cast<Eigen::Index>(la.size()), static_cast<Eigen::Index>(lb.size()));
  for (std::size_t i = 0; i < a.size(); ++i) counts(la[a[i]], lb[b[i]]) += 1.0;
  const auto d = chi_square_from_counts(counts);
  AssociationResult r;
  r.variable = std::move(variable);
  r.test = TestKind::ChiSquare;
  r.statistic = d.statistic;
  r.p_value = d.p_value;
  return r;
}

VifReport summarize_vif(std::vector<std::string> names, VectorXd values) {
  VifReport report;
  double sum = 0.0;
  std::size_t finite = 0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    const double v = values(j);
    if (std::isinf(v)) {
      ++report.infinite_count;
    } else {
      sum += v;
      ++finite;
    }
    if (v > kVifIndividualLimit) report.individual_flags.push_back(names[static_cast<std::size_t>(j)]);
  }
  report.average_vif = finite ? sum / static_cast<double>(finite) : 0.0;
  report.average_flag = report.average_vif > kVifAverageLimit;
  report.names = std::move(names);
  report.values = std::move(values);
  return report;
}

VifReport vif(const Table& table, const std::vector<std::string>& predictors) {
  if (predictors.size() < 2) throw ValidationError("vif: need at least 2 predictors");
  for (const auto& p : predictors) {
    const auto kind = table.column(p).kind();
    if (kind != ColumnKind::Numeric && kind != ColumnKind::Boolean)
      throw ValidationError("vif: column '" + p + "' is not numeric");
  }
  const auto rows = table.complete_case_rows(predictors);
  MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(predictors.size()));
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    const Column& c = table.column(predictors[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.as_double(rows[i]);
  }
  auto report = summarize_vif(predictors, variance_inflation(X));
  report.complete_cases = rows.size();
  return report;
}

// ------------------------------------------------------------ quick filter

namespace {

enum class Shape { Continuous, Binary, MultiLevel, Unusable };

Shape shape_of(const Column& c, const ColumnStats& s) {
  if (c.kind() == ColumnKind::Timestamp || s.distinct_count == 0) return Shape::Unusable;
  if (c.kind() == ColumnKind::Boolean || s.distinct_count == 2) return Shape::Binary;
  if (c.kind() == ColumnKind::Numeric) return Shape::Continuous;
  return Shape::MultiLevel;
}

// Group-1 membership for a two-valued column: true for the larger value
// (numeric), `true` (boolean) or the lexicographically larger level.
std::vector<std::uint8_t> binary_groups(const Column& c) {
  std::vector<std::uint8_t> g(c.size(), 0);
  if (c.kind() == ColumnKind::Categorical) {
    std::string top;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!c.is_missing(i) && c.level(i) > top) top = c.level(i);
    for (std::size_t i = 0; i < c.size(); ++i) g[i] = !c.is_missing(i) && c.level(i) == top;
  } else {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!c.is_missing(i)) top = std::max(top, c.as_double(i));
    for (std::size_t i = 0; i < c.size(); ++i) g[i] = !c.is_missing(i) && c.as_double(i) == top;
  }
  return g;
}

std::vector<std::string> sorted_levels(const Column& c) {
  std::vector<std::string> levels;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c.is_missing(i)) levels.push_back(c.render(i));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

// Fisher z approximation; informational only, the Pearson rule uses |r|.
double fisher_p_value(double r, const Column& a, const Column& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (!a.is_missing(i) && !b.is_missing(i)) ? 1 : 0;
  if (n <= 3) return 1.0;
  if (std::abs(r) >= 1.0) return 0.0;
  const double z = std::atanh(std::abs(r)) * std::sqrt(static_cast<double>(n - 3));
  return std::min(1.0, 2.0 * normal_sf(z));
}

// Values of `numeric`, grouped by `groups`; rows missing in either are NaN.
AssociationResult rank_test(const Column& numeric, const Column& groups, const std::string& name,
                            std::span<const std::uint8_t> membership) {
  std::vector<double> values(numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i)
    values[i] = groups.is_missing(i) ? missing_value() : numeric.as_double(i);
  return mann_whitney_u(values, membership, name);
}

AssociationResult one_vs_rest(const Column& numeric, const Column& groups, const std::string& name, double alpha) {
  std::optional<AssociationResult> best;
  for (const auto& level : sorted_levels(groups)) {
    std::vector<std::uint8_t> g(groups.size(), 0);
    for (std::size_t i = 0; i < groups.size(); ++i) g[i] = !groups.is_missing(i) && groups.render(i) == level;
    AssociationResult r;
    try {
      r = rank_test(numeric, groups, name, g);
    } catch (const ValidationError&) {
      continue;  // level absent after pairwise deletion
    }
    r.detail = level;
    r.kept = r.p_value <= alpha;
    if (!best || r.p_value < best->p_value) best = r;
  }
  if (!best) throw ValidationError("no testable level");
  return *best;
}

AssociationResult chi_square_columns(const Column& a, const Column& b, const std::string& name) {
  std::vector<std::string> la, lb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_missing(i) || b.is_missing(i)) continue;
    la.push_back(a.render(i));
    lb.push_back(b.render(i));
  }
  return chi_square_independence(la, lb, name);
}

}  // namespace

ScreenResult quick_filter(const Table& table, const std::string& response, const ScreenRules& rules) {
  const Column& y = table.column(response);
  const ColumnStats ys = column_stats(y);
  const Shape y_shape = shape_of(y, ys);
  if (y_shape == Shape::Unusable) throw ValidationError("response '" + response + "' cannot be tested");
  if (ys.is_constant) throw ValidationError("response '" + response + "' is constant");
  if (table.column_count() < 2) throw ValidationError("quick_filter: no candidate predictors");

  ScreenResult out;
  const auto y_groups = y_shape == Shape::Binary ? binary_groups(y) : std::vector<std::uint8_t>{};

  for (const Column& x : table.columns()) {
    if (x.name() == response) continue;
    const ColumnStats xs = column_stats(x);
    if (xs.is_constant) {
      out.constant.push_back(x.name());
      continue;
    }
    const Shape x_shape = shape_of(x, xs);
    if (x_shape == Shape::Unusable) {
      out.untested.push_back(x.name());
      continue;
    }
    AssociationResult r;
    try {
      if (x_shape == Shape::Continuous && y_shape == Shape::Continuous) {
        r.variable = x.name();
        r.test = TestKind::Pearson;
        r.statistic = pearson_r(x.to_vector(), y.to_vector());
        r.p_value = fisher_p_value(r.statistic, x, y);
        r.kept = std::abs(r.statistic) >= rules.r_min;
      } else if (x_shape == Shape::Continuous && y_shape == Shape::Binary) {
        r = rank_test(x, y, x.name(), y_groups);
        r.kept = r.p_value <= rules.alpha;
      } else if (x_shape == Shape::Binary && y_shape == Shape::Continuous) {
        r = rank_test(y, x, x.name(), binary_groups(x));
        r.kept = r.p_value <= rules.alpha;
      } else if (x_shape == Shape::Continuous && y_shape == Shape::MultiLevel) {
        r = one_vs_rest(x, y, x.name(), rules.alpha);
      } else if (x_shape == Shape::MultiLevel && y_shape == Shape::Continuous) {
        r = one_vs_rest(y, x, x.name(), rules.alpha);
      } else {
        r = chi_square_columns(x, y, x.name());
        r.kept = r.p_value <= rules.alpha;
      }
    } catch (const ZeroVarianceError&) {
      // Constant on the rows it shares with the response.
      out.constant.push_back(x.name());
      continue;
    } catch (const ValidationError&) {
      out.untested.push_back(x.name());
      continue;
    }
    if (r.kept) out.retained.push_back(x.name());
    out.results.push_back(std::move(r));
  }
  return out;
}

}  // namespace mfg
