#include "mfgpipe/select.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include "mfgpipe/error.hpp"
#include "mfgpipe/random.hpp"
#include "mfgpipe/stats.hpp"

namespace mfg {

std::string selector_display_name(std::string_view id) {
  if (id == selector::stepwise) return "Stepwise selection";
  if (id == selector::lasso) return "Lasso";
  if (id == selector::random_forest) return "Random forest";
  if (id == selector::boosting) return "Boosting";
  return std::string(id);
}

bool SelectorResult::is_selected(std::string_view name) const {
  return std::find(selected.begin(), selected.end(), name) != selected.end();
}

std::optional<double> SelectorResult::score(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i] == name) return scores(static_cast<Eigen::Index>(i));
  return std::nullopt;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ValidationError("kfold: need 2 <= k <= n");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

namespace {

MatrixXd take_columns(const MatrixXd& X, const std::vector<Eigen::Index>& cols) {
  MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = X.col(cols[c]);
  return out;
}

template <class Rows>
MatrixXd take_rows(const MatrixXd& X, const Rows& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

template <class Rows>
VectorXd take_rows(const VectorXd& y, const Rows& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
  return out;
}

void check_inputs(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names) {
  if (X.rows() != y.size()) throw ValidationError("selector: X and y row counts differ");
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw ValidationError("selector: one name per column");
  if (X.hasNaN() || y.hasNaN()) throw ValidationError("selector: complete cases required");
}

// Top `k` positive scores, reported in column order.
std::vector<std::string> top_k(const std::vector<std::string>& names, const VectorXd& scores, std::size_t k) {
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < order.size() && keep.size() < k; ++i)
    if (scores(static_cast<Eigen::Index>(order[i])) > 0.0) keep.push_back(order[i]);
  std::sort(keep.begin(), keep.end());
  std::vector<std::string> out;
  for (auto i : keep) out.push_back(names[i]);
  return out;
}

}  // namespace

// ------------------------------------------------------------ stepwise

double aic(double rss, std::size_t n, std::size_t k) {
  const double dn = static_cast<double>(n);
  return dn * std::log(rss / dn) + 2.0 * static_cast<double>(k + 1);
}

SelectorResult forward_stepwise(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names) {
  check_inputs(X, y, names);
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const Eigen::Index p = X.cols();
  SelectorResult result;
  result.selector = std::string(selector::stepwise);
  result.variables = names;
  result.scores = VectorXd::Zero(p);

  std::vector<Eigen::Index> candidates;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double spread = (X.col(j).array() - X.col(j).mean()).matrix().squaredNorm();
    if (spread == 0.0)
      result.skipped.push_back(names[static_cast<std::size_t>(j)]);
    else
      candidates.push_back(j);
  }
  const double tss = (y.array() - y.mean()).matrix().squaredNorm();
  if (n < 2 || tss == 0.0) return result;

  const double floor = 1e-12 * tss;
  std::vector<Eigen::Index> chosen;
  std::vector<bool> in_model(static_cast<std::size_t>(p), false);
  double current = aic(tss, n, 0);

  while (true) {
    std::optional<Eigen::Index> best;
    double best_aic = current;
    const std::size_t k = chosen.size() + 1;
    if (n <= k + 1) break;
    for (Eigen::Index j : candidates) {
      if (in_model[static_cast<std::size_t>(j)]) continue;
      auto cols = chosen;
      cols.push_back(j);
      const auto fit = least_squares_fit(take_columns(X, cols), y);
      const double a = aic(std::max(fit.rss, floor), n, k);
      result.scores(j) = current - a;
      if (a < best_aic) {
        best_aic = a;
        best = j;
      }
    }
    if (!best) break;
    result.scores(*best) = current - best_aic;
    in_model[static_cast<std::size_t>(*best)] = true;
    chosen.push_back(*best);
    current = best_aic;
  }
  std::sort(chosen.begin(), chosen.end());
  for (auto j : chosen) result.selected.push_back(names[static_cast<std::size_t>(j)]);
  return result;
}

// ------------------------------------------------------------ lasso CV

std::vector<double> default_lambda_grid(double lambda_max, std::size_t size, double min_ratio) {
  if (size == 0) throw ValidationError("lambda grid size must be positive");
  if (lambda_max <= 0.0) return {0.0};
  std::vector<double> grid(size);
  if (size == 1) return {lambda_max};
  const double lo = std::log(lambda_max * min_ratio), hi = std::log(lambda_max);
  for (std::size_t i = 0; i < size; ++i)
    grid[i] = std::exp(hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(size - 1));
  grid.front() = lambda_max;
  return grid;
}

LassoCvResult lasso_select_cv(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                              const LassoCvOptions& options) {
  check_inputs(X, y, names);
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2 * options.folds) throw ValidationError("lasso CV: need n >= 2k rows");

  LassoCvResult out;
  const double lambda_max = lasso_lambda_max(X, y);
  out.lambdas = options.lambda_grid.empty() ? default_lambda_grid(lambda_max, options.grid_size, options.min_ratio)
                                            : options.lambda_grid;
  for (double l : out.lambdas)
    if (!(l >= 0.0)) throw ValidationError("lasso CV: lambdas must be >= 0");
  std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>{});
  out.cv_mse.assign(out.lambdas.size(), 0.0);

  const auto folds = kfold_indices(n, options.folds, options.seed);
  for (const auto& validation : folds) {
    std::vector<std::size_t> train;
    std::vector<bool> held(n, false);
    for (auto i : validation) held[i] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!held[i]) train.push_back(i);
    const MatrixXd Xv = take_rows(X, validation);
    const VectorXd yv = take_rows(y, validation);
    const Standardization<double> s(take_rows(X, train), take_rows(y, train));
    VectorXd warm = VectorXd::Zero(X.cols());
    for (std::size_t l = 0; l < out.lambdas.size(); ++l) {
      const auto fit = lasso_coordinate_descent(s, out.lambdas[l], options.solver, &warm);
      warm = fit.standardized;
      const VectorXd err = yv - ((Xv * fit.coefficients).array() + fit.intercept).matrix();
      out.cv_mse[l] += err.squaredNorm() / static_cast<double>(yv.size()) / static_cast<double>(folds.size());
    }
  }

  std::size_t best = 0;
  for (std::size_t l = 1; l < out.lambdas.size(); ++l)
    if (out.cv_mse[l] < out.cv_mse[best]) best = l;
  out.chosen_lambda = out.lambdas[best];
  out.fit = lasso_coordinate_descent(X, y, out.chosen_lambda, options.solver);

  auto& sel = out.selection;
  sel.selector = std::string(selector::lasso);
  sel.variables = names;
  sel.scores = out.fit.standardized.cwiseAbs();
  for (std::size_t j = 0; j < names.size(); ++j)
    if (out.fit.coefficients(static_cast<Eigen::Index>(j)) != 0.0) sel.selected.push_back(names[j]);
  return out;
}

// ------------------------------------------------------------ trees

namespace {

struct Node {
  Eigen::Index feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0, right = 0;
  double value = 0.0;
};

struct Tree {
  std::vector<Node> nodes;

  double predict(const MatrixXd& X, Eigen::Index row) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) at = X(row, nodes[at].feature) <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
    return nodes[at].value;
  }
};

struct TreeSettings {
  TreeTask task = TreeTask::Regression;
  std::size_t classes = 0;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::size_t m_try = 0;
};

// Grows one CART tree on `rows` (duplicates allowed, as in a bootstrap) and
// adds each split's impurity decrease times node fraction to `importance`.
class TreeGrower {
public:
  TreeGrower(const MatrixXd& X, const VectorXd& y, const TreeSettings& settings, Rng* rng, VectorXd& importance)
      : X_(X), y_(y), s_(settings), rng_(rng), importance_(importance) {
    features_.resize(static_cast<std::size_t>(X.cols()));
    std::iota(features_.begin(), features_.end(), Eigen::Index{0});
  }

  Tree grow(std::vector<std::size_t> rows) {
    root_n_ = static_cast<double>(rows.size());
    Tree tree;
    tree.nodes.reserve(64);
    build(tree, std::move(rows), 0);
    return tree;
  }

private:
  struct Split {
    Eigen::Index feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  // Node impurity scaled by node size: SSE for regression, n * Gini otherwise.
  double impurity(const std::vector<std::size_t>& rows) const {
    const double n = static_cast<double>(rows.size());
    if (s_.task == TreeTask::Regression) {
      double mean = 0.0;
      for (auto r : rows) mean += y_(static_cast<Eigen::Index>(r));
      mean /= n;
      double sse = 0.0;
      for (auto r : rows) sse += (y_(static_cast<Eigen::Index>(r)) - mean) * (y_(static_cast<Eigen::Index>(r)) - mean);
      return sse;
    }
    std::vector<double> counts(s_.classes, 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(y_(static_cast<Eigen::Index>(r)))] += 1.0;
    double sq = 0.0;
    for (double c : counts) sq += c * c;
    return n - sq / n;
  }

  double leaf_value(const std::vector<std::size_t>& rows) const {
    if (s_.task == TreeTask::Regression) {
      double sum = 0.0;
      for (auto r : rows) sum += y_(static_cast<Eigen::Index>(r));
      return sum / static_cast<double>(rows.size());
    }
    std::vector<std::size_t> counts(s_.classes, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(y_(static_cast<Eigen::Index>(r)))];
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  std::vector<Eigen::Index> candidate_features() {
    const std::size_t p = features_.size();
    const std::size_t m = (s_.m_try == 0 || s_.m_try >= p || !rng_) ? p : s_.m_try;
    if (m == p) return features_;
    std::vector<Eigen::Index> pool = features_;
    for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng_->index(p - i)]);
    pool.resize(m);
    std::sort(pool.begin(), pool.end());  // equal gains resolve to the lower column
    return pool;
  }

  Split best_split(const std::vector<std::size_t>& rows, double parent) {
    Split best;
    const std::size_t n = rows.size();
    const double node_mean = s_.task == TreeTask::Regression ? leaf_value(rows) : 0.0;
    const double min_gain = 1e-12 * std::max(parent, 1e-300);
    std::vector<std::pair<double, double>> sorted(n);  // (x, y or class)
    std::vector<double> left_counts(s_.classes), right_counts(s_.classes);

    for (Eigen::Index f : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        sorted[i] = {X_(r, f), s_.task == TreeTask::Regression ? y_(r) - node_mean : y_(r)};
      }
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;

      double sum_l = 0.0, sq_l = 0.0, sum_all = 0.0, sq_all = 0.0;
      if (s_.task == TreeTask::Regression) {
        for (const auto& v : sorted) {
          sum_all += v.second;
          sq_all += v.second * v.second;
        }
      } else {
        std::fill(left_counts.begin(), left_counts.end(), 0.0);
        std::fill(right_counts.begin(), right_counts.end(), 0.0);
        for (const auto& v : sorted) right_counts[static_cast<std::size_t>(v.second)] += 1.0;
      }
      double sq_counts_l = 0.0;
      double sq_counts_r = 0.0;
      if (s_.task == TreeTask::Classification)
        for (double c : right_counts) sq_counts_r += c * c;

      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double v = sorted[i].second;
        if (s_.task == TreeTask::Regression) {
          sum_l += v;
          sq_l += v * v;
        } else {
          auto& cl = left_counts[static_cast<std::size_t>(v)];
          auto& cr = right_counts[static_cast<std::size_t>(v)];
          sq_counts_l += 2.0 * cl + 1.0;
          sq_counts_r -= 2.0 * cr - 1.0;
          cl += 1.0;
          cr -= 1.0;
        }
        const std::size_t nl = i + 1, nr = n - nl;
        if (sorted[i].first == sorted[i + 1].first) continue;
        if (nl < s_.min_leaf || nr < s_.min_leaf) continue;
        const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
        double children;
        if (s_.task == TreeTask::Regression) {
          const double sum_r = sum_all - sum_l, sq_r = sq_all - sq_l;
          children = std::max(0.0, sq_l - sum_l * sum_l / dl) + std::max(0.0, sq_r - sum_r * sum_r / dr);
        } else {
          children = (dl - sq_counts_l / dl) + (dr - sq_counts_r / dr);
        }
        const double gain = parent - children;
        if (gain > best.gain && gain > min_gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }
    return best;
  }

  std::size_t build(Tree& tree, std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.push_back({});
    tree.nodes[id].value = leaf_value(rows);
    const double parent = impurity(rows);
    if (depth >= s_.max_depth || rows.size() < 2 * s_.min_leaf || parent <= 0.0) return id;

    const Split split = best_split(rows, parent);
    if (split.feature < 0) return id;
    importance_(split.feature) += split.gain / root_n_;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (X_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = build(tree, std::move(left), depth + 1);
    const std::size_t r = build(tree, std::move(right), depth + 1);
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  const MatrixXd& X_;
  const VectorXd& y_;
  TreeSettings s_;
  Rng* rng_;
  VectorXd& importance_;
  std::vector<Eigen::Index> features_;
  double root_n_ = 1.0;
};

SelectorResult importance_result(std::string_view id, const std::vector<std::string>& names, VectorXd importance,
                                 std::size_t k) {
  SelectorResult r;
  r.selector = std::string(id);
  r.variables = names;
  const double total = importance.sum();
  if (total > 0.0) importance /= total;
  r.scores = std::move(importance);
  r.selected = top_k(names, r.scores, k);
  return r;
}

}  // namespace

SelectorResult random_forest_importance(const MatrixXd& X, const VectorXd& y, TreeTask task,
                                        const std::vector<std::string>& names, const ForestParams& params) {
  check_inputs(X, y, names);
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t p = static_cast<std::size_t>(X.cols());
  if (n < 10) throw ValidationError("random forest: need at least 10 rows");
  if (p == 0) throw ValidationError("random forest: no predictors");

  TreeSettings settings;
  settings.task = task;
  settings.max_depth = params.max_depth;
  settings.min_leaf = std::max<std::size_t>(1, params.min_leaf);
  settings.m_try = params.m_try ? params.m_try : static_cast<std::size_t>(std::ceil(std::sqrt(double(p))));
  if (task == TreeTask::Classification) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) < 0 || y(i) != std::floor(y(i))) throw ValidationError("random forest: class codes must be 0..C-1");
    settings.classes = static_cast<std::size_t>(y.maxCoeff()) + 1;
  }

  std::vector<VectorXd> per_tree(params.trees, VectorXd::Zero(static_cast<Eigen::Index>(p)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < params.trees; t = next++) {
      Rng rng(derive_seed(params.seed, t));
      std::vector<std::size_t> sample(n);
      for (auto& s : sample) s = rng.index(n);
      TreeGrower grower(X, y, settings, &rng, per_tree[t]);
      grower.grow(std::move(sample));
    }
  };
  unsigned threads = params.threads ? params.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, params.trees)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  VectorXd importance = VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (const auto& v : per_tree) importance += v;  // tree-index order
  return importance_result(selector::random_forest, names, std::move(importance), params.top_k);
}

BoostResult boosted_stumps_importance(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                                      const BoostParams& params) {
  check_inputs(X, y, names);
  if (X.rows() < 1) throw ValidationError("boosting: no rows");
  if (!(params.rate > 0.0 && params.rate <= 1.0)) throw ValidationError("boosting: rate must be in (0, 1]");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw ValidationError("boosting: subsample must be in (0, 1]");
  const auto n = static_cast<std::size_t>(X.rows());

  BoostResult out;
  out.base_prediction = y.mean();
  out.fitted = VectorXd::Constant(X.rows(), out.base_prediction);
  VectorXd importance = VectorXd::Zero(X.cols());

  TreeSettings settings;
  settings.task = TreeTask::Regression;
  settings.max_depth = params.depth;
  settings.min_leaf = std::max<std::size_t>(1, params.min_leaf);
  Rng rng(params.seed);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t round = 0; round < params.rounds; ++round) {
    const VectorXd residual = y - out.fitted;
    std::vector<std::size_t> rows = all;
    if (params.subsample < 1.0) {
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(params.subsample * double(n))));
      std::sort(rows.begin(), rows.end());
    }
    TreeGrower grower(X, residual, settings, nullptr, importance);
    const Tree tree = grower.grow(std::move(rows));
    if (tree.nodes.size() > 1)
      for (Eigen::Index i = 0; i < X.rows(); ++i) out.fitted(i) += params.rate * tree.predict(X, i);
    out.train_mse.push_back((y - out.fitted).squaredNorm() / double(n));
  }
  out.selection = importance_result(selector::boosting, names, std::move(importance), params.top_k);
  return out;
}

// ------------------------------------------------------------ voting

const VoteRow* VoteTable::find(std::string_view variable) const {
  for (const auto& r : rows)
    if (r.variable == variable) return &r;
  return nullptr;
}

namespace {

// Per-selector normalized rank of each scored variable (1 = best score).
std::map<std::string, double> normalized_ranks(const SelectorResult& r) {
  std::vector<std::size_t> order(r.variables.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = r.scores(static_cast<Eigen::Index>(a)), sb = r.scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return r.variables[a] < r.variables[b];
  });
  std::map<std::string, double> ranks;
  for (std::size_t i = 0; i < order.size(); ++i)
    ranks[r.variables[order[i]]] = static_cast<double>(i + 1) / static_cast<double>(order.size());
  return ranks;
}

bool row_before(const VoteRow& a, const VoteRow& b) {
  if (a.votes != b.votes) return a.votes > b.votes;
  if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
  return a.variable < b.variable;
}

VoteRow make_row(const std::string& variable, const std::vector<SelectorResult>& results,
                 const std::vector<std::map<std::string, double>>& ranks) {
  VoteRow row;
  row.variable = variable;
  double rank_sum = 0.0;
  for (std::size_t s = 0; s < results.size(); ++s) {
    const bool sel = results[s].is_selected(variable);
    row.flags.push_back(sel ? 1 : 0);
    row.votes += sel ? 1 : 0;
    auto it = ranks[s].find(variable);
    rank_sum += it != ranks[s].end() ? it->second : 1.0;
  }
  row.mean_rank = rank_sum / static_cast<double>(results.size());
  return row;
}

}  // namespace

VoteTable vote(const std::vector<SelectorResult>& results) {
  if (results.size() < 2) throw ValidationError("vote: need at least 2 selector results");
  VoteTable table;
  std::set<std::string> ids;
  for (const auto& r : results) {
    if (!ids.insert(r.selector).second) throw ValidationError("vote: duplicate selector id '" + r.selector + "'");
    if (static_cast<Eigen::Index>(r.variables.size()) != r.scores.size())
      throw ValidationError("vote: scores and variables misaligned for '" + r.selector + "'");
    table.selectors.push_back(r.selector);
  }
  std::vector<std::map<std::string, double>> ranks;
  for (const auto& r : results) ranks.push_back(normalized_ranks(r));

  std::set<std::string> picked;
  for (const auto& r : results) picked.insert(r.selected.begin(), r.selected.end());
  for (const auto& v : picked) table.rows.push_back(make_row(v, results, ranks));
  std::sort(table.rows.begin(), table.rows.end(), row_before);
  return table;
}

// ------------------------------------------------------------ ensemble

namespace {

struct Design {
  MatrixXd linear;
  MatrixXd trees;
  VectorXd y;
  TreeTask task = TreeTask::Regression;
  std::vector<std::string> linear_names;
  std::vector<std::string> tree_names;
  std::size_t rows = 0;
};

bool two_valued(const Column& c) { return column_stats(c).distinct_count == 2; }

// Value mapping for a two-level categorical: lexicographically larger level = 1.
double binary_code(const Column& c, std::size_t row, const std::string& top) { return c.level(row) == top ? 1.0 : 0.0; }

std::string top_level(const Column& c) {
  std::string top;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c.is_missing(i) && c.level(i) > top) top = c.level(i);
  return top;
}

Design build_design(const Table& table, const std::string& response, const std::vector<std::string>& exclude) {
  const Column& yc = table.column(response);
  Design d;
  std::string y_top;
  switch (yc.kind()) {
    case ColumnKind::Numeric: d.task = TreeTask::Regression; break;
    case ColumnKind::Boolean: d.task = TreeTask::Classification; break;
    case ColumnKind::Categorical:
      if (!two_valued(yc)) throw ValidationError("response '" + response + "' must be numeric or two-valued");
      d.task = TreeTask::Classification;
      y_top = top_level(yc);
      break;
    case ColumnKind::Timestamp: throw ValidationError("response '" + response + "' is a timestamp");
  }

  std::vector<const Column*> candidates;
  for (const auto& c : table.columns()) {
    if (c.name() == response || c.kind() == ColumnKind::Timestamp) continue;
    if (std::find(exclude.begin(), exclude.end(), c.name()) != exclude.end()) continue;
    if (c.missing_count() == c.size()) continue;
    candidates.push_back(&c);
  }
  std::vector<std::string> needed{response};
  for (auto* c : candidates) needed.push_back(c->name());
  const auto rows = table.complete_case_rows(needed);
  d.rows = rows.size();

  const auto n = static_cast<Eigen::Index>(rows.size());
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    d.y(i) = yc.kind() == ColumnKind::Categorical ? binary_code(yc, r, y_top) : yc.as_double(r);
  }

  std::vector<VectorXd> linear_cols, tree_cols;
  for (auto* c : candidates) {
    VectorXd v(n);
    const bool categorical = c->kind() == ColumnKind::Categorical;
    const bool binary_categorical = categorical && two_valued(*c);
    const std::string top = binary_categorical ? top_level(*c) : std::string{};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = rows[static_cast<std::size_t>(i)];
      v(i) = binary_categorical ? binary_code(*c, r, top) : c->as_double(r);
    }
    tree_cols.push_back(v);
    d.tree_names.push_back(c->name());
    if (!categorical || binary_categorical) {
      linear_cols.push_back(std::move(v));
      d.linear_names.push_back(c->name());
    }
  }
  d.linear.resize(n, static_cast<Eigen::Index>(linear_cols.size()));
  for (std::size_t j = 0; j < linear_cols.size(); ++j) d.linear.col(static_cast<Eigen::Index>(j)) = linear_cols[j];
  d.trees.resize(n, static_cast<Eigen::Index>(tree_cols.size()));
  for (std::size_t j = 0; j < tree_cols.size(); ++j) d.trees.col(static_cast<Eigen::Index>(j)) = tree_cols[j];
  return d;
}

// Re-expresses a result over the full tree universe so that every selector
// scores the same variables; unscored variables get -infinity.
SelectorResult widen(SelectorResult r, const std::vector<std::string>& universe) {
  VectorXd scores = VectorXd::Constant(static_cast<Eigen::Index>(universe.size()), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (auto s = r.score(universe[i])) scores(static_cast<Eigen::Index>(i)) = *s;
  r.variables = universe;
  r.scores = std::move(scores);
  return r;
}

}  // namespace

EnsembleResult run_ensemble(const Table& table, const std::string& response, const EnsembleConfig& config,
                            const std::vector<std::string>& exclude) {
  const Design d = build_design(table, response, exclude);
  if (d.tree_names.empty()) throw ValidationError("select: no candidate predictors");

  EnsembleResult out;
  out.rows_used = d.rows;
  out.linear_candidates = d.linear_names;
  out.tree_candidates = d.tree_names;

  LassoCvOptions lasso = config.lasso;
  lasso.seed = derive_seed(config.seed, 1);
  ForestParams forest = config.forest;
  forest.seed = derive_seed(config.seed, 2);
  forest.top_k = config.top_k;
  BoostParams boost = config.boost;
  boost.seed = derive_seed(config.seed, 3);
  boost.top_k = config.top_k;

  out.results.push_back(widen(forward_stepwise(d.linear, d.y, d.linear_names), d.tree_names));
  out.results.push_back(widen(lasso_select_cv(d.linear, d.y, d.linear_names, lasso).selection, d.tree_names));
  out.results.push_back(random_forest_importance(d.trees, d.y, d.task, d.tree_names, forest));
  out.results.push_back(boosted_stumps_importance(d.trees, d.y, d.tree_names, boost).selection);
  out.votes = vote(out.results);
  return out;
}

SelectionSession::SelectionSession(std::size_t cap, std::size_t max_iterations)
    : cap_(cap), max_iterations_(max_iterations) {
  if (cap == 0) throw ValidationError("selection cap must be positive");
  if (max_iterations == 0) throw ValidationError("max iterations must be positive");
}

void SelectionSession::exclude(const std::vector<std::string>& variables) {
  for (const auto& v : variables) {
    exclusions_.insert(v);
    pending_.erase(v);
  }
}

void SelectionSession::keep_pending(const std::vector<std::string>& variables) {
  for (const auto& v : variables) {
    if (exclusions_.contains(v)) throw ValidationError("variable '" + v + "' is excluded and cannot be pending");
    pending_.insert(v);
  }
}

VoteTable truncate_report(const VoteTable& table, std::size_t cap) {
  std::size_t pending = 0;
  for (const auto& r : table.rows) pending += r.pending ? 1 : 0;
  std::size_t room = cap > pending ? cap - pending : 0;
  VoteTable out{table.selectors, {}};
  for (const auto& r : table.rows) {
    if (r.pending) {
      out.rows.push_back(r);
    } else if (room > 0) {
      out.rows.push_back(r);
      --room;
    }
  }
  return out;
}

IterationResult run_iteration(SelectionSession session, const Table& table, const std::string& response,
                              const EnsembleConfig& config) {
  if (session.completed() >= session.max_iterations())
    throw ValidationError("selection iteration budget (" + std::to_string(session.max_iterations()) + ") exhausted");
  table.column(response);
  for (const auto& p : session.pending())
    if (!table.has_column(p)) throw ValidationError("pending variable '" + p + "' not in table");

  const std::vector<std::string> exclude(session.exclusions().begin(), session.exclusions().end());
  EnsembleResult ensemble = run_ensemble(table, response, config, exclude);

  VoteTable full = ensemble.votes;
  std::vector<std::map<std::string, double>> ranks;
  for (const auto& r : ensemble.results) ranks.push_back(normalized_ranks(r));
  for (const auto& p : session.pending()) {
    if (!full.find(p)) full.rows.push_back(make_row(p, ensemble.results, ranks));
  }
  for (auto& row : full.rows) row.pending = session.pending().contains(row.variable);
  std::sort(full.rows.begin(), full.rows.end(), row_before);

  VoteTable report = truncate_report(full, session.cap());
  session.record(report);
  return {std::move(session), std::move(report), std::move(ensemble)};
}

std::vector<std::string> read_name_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read name list '" + path + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    names.push_back(line.substr(start));
  }
  return names;
}

}  // namespace mfg
