#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mfgpipe/lasso.hpp"
#include "mfgpipe/linalg.hpp"
#include "mfgpipe/table.hpp"

namespace mfg {

namespace selector {
inline constexpr std::string_view stepwise = "stepwise";
inline constexpr std::string_view lasso = "lasso";
inline constexpr std::string_view random_forest = "random_forest";
inline constexpr std::string_view boosting = "boosting";
}  // namespace selector

// Column header used when printing a selector id.
std::string selector_display_name(std::string_view id);

struct SelectorResult {
  std::string selector;
  std::vector<std::string> variables;  // scored universe
  VectorXd scores;                     // aligned with `variables`
  std::vector<std::string> selected;   // subset of `variables`, in column order
  std::vector<std::string> skipped;    // e.g. zero-variance candidates

  bool is_selected(std::string_view name) const;
  std::optional<double> score(std::string_view name) const;
};

// k disjoint folds covering 0..n-1 from a seeded shuffle; the first n % k
// folds hold one extra index. Indices within a fold are ascending.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

// ------------------------------------------------------------ stepwise

// Greedy forward search from the intercept-only model, adding the candidate
// that most lowers AIC = n ln(RSS/n) + 2(k+1) until nothing improves it.
// Residual sums below 1e-12 of the total are floored there, so an exact fit is
// never "improved" by rounding noise. Score = AIC drop when the variable
// entered (or the last drop it would have given, for unselected variables).
SelectorResult forward_stepwise(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names);

double aic(double rss, std::size_t n, std::size_t k);

// ------------------------------------------------------------ lasso CV

struct LassoCvOptions {
  std::vector<double> lambda_grid;  // empty: default log-spaced grid
  std::size_t grid_size = 50;
  double min_ratio = 1e-4;          // smallest lambda as a fraction of lambda_max
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  LassoOptions solver;
};

struct LassoCvResult {
  SelectorResult selection;
  std::vector<double> lambdas;  // descending
  std::vector<double> cv_mse;   // aligned with `lambdas`
  double chosen_lambda = 0.0;
  LassoFit<double> fit;         // on all rows at chosen_lambda
};

std::vector<double> default_lambda_grid(double lambda_max, std::size_t size, double min_ratio);

// Picks the lambda with the lowest mean validation MSE (the larger lambda on
// ties). Score = |standardized coefficient| at that lambda.
LassoCvResult lasso_select_cv(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                              const LassoCvOptions& options = {});

// ------------------------------------------------------------ trees

enum class TreeTask { Regression, Classification };

struct ForestParams {
  std::size_t trees = 200;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::size_t m_try = 0;  // 0: ceil(sqrt(p))
  std::size_t top_k = 20;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency; results do not depend on it
};

// Mean impurity decrease (variance or Gini, weighted by node fraction) over a
// bootstrap forest, normalized to sum to 1. For classification `y` holds class
// codes 0..C-1. Selected = the top_k variables with positive importance.
SelectorResult random_forest_importance(const MatrixXd& X, const VectorXd& y, TreeTask task,
                                        const std::vector<std::string>& names, const ForestParams& params = {});

struct BoostParams {
  std::size_t rounds = 100;
  double rate = 0.1;
  std::size_t depth = 2;
  std::size_t min_leaf = 5;
  double subsample = 1.0;  // row fraction per round; below 1 the seed drives the draw
  std::size_t top_k = 20;
  std::uint64_t seed = 42;
};

struct BoostResult {
  SelectorResult selection;
  double base_prediction = 0.0;    // mean(y)
  std::vector<double> train_mse;   // after each round
  VectorXd fitted;                 // final in-sample prediction
};

// Squared-loss gradient boosting with shallow regression trees.
BoostResult boosted_stumps_importance(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                                      const BoostParams& params = {});

// ------------------------------------------------------------ voting

struct VoteRow {
  std::string variable;
  std::vector<std::uint8_t> flags;  // one per selector, table column order
  std::size_t votes = 0;
  double mean_rank = 1.0;  // mean over selectors of score rank / scored count; 1 when unscored
  bool pending = false;
};

struct VoteTable {
  std::vector<std::string> selectors;
  std::vector<VoteRow> rows;  // votes desc, then mean_rank asc, then name

  const VoteRow* find(std::string_view variable) const;
};

// One row per variable picked by at least one selector.
VoteTable vote(const std::vector<SelectorResult>& results);

// ------------------------------------------------------------ ensemble + session

struct EnsembleConfig {
  std::uint64_t seed = 42;
  std::size_t top_k = 20;
  LassoCvOptions lasso;
  ForestParams forest;
  BoostParams boost;
};

struct EnsembleResult {
  std::vector<SelectorResult> results;  // stepwise, lasso, random_forest, boosting
  VoteTable votes;
  std::size_t rows_used = 0;  // complete cases
  std::vector<std::string> linear_candidates;
  std::vector<std::string> tree_candidates;
};

// Runs the four selectors on the listwise-complete rows of `response` and the
// candidate columns (default: every other non-timestamp column). Linear
// selectors see numeric, boolean and two-level categorical columns as numbers;
// the tree selectors also take multi-level categoricals as level codes. The
// response must be numeric, boolean or two-level categorical.
EnsembleResult run_ensemble(const Table& table, const std::string& response, const EnsembleConfig& config,
                            const std::vector<std::string>& exclude = {});

class SelectionSession {
public:
  explicit SelectionSession(std::size_t cap = 30, std::size_t max_iterations = 3);

  // Removes variables from future rounds (and from the pending list).
  void exclude(const std::vector<std::string>& variables);
  // Keeps unconfirmed variables in view for the next round.
  void keep_pending(const std::vector<std::string>& variables);

  std::size_t iteration() const noexcept { return history_.size() + 1; }  // next round, 1-based
  std::size_t completed() const noexcept { return history_.size(); }
  std::size_t cap() const noexcept { return cap_; }
  std::size_t max_iterations() const noexcept { return max_iterations_; }
  const std::set<std::string>& exclusions() const noexcept { return exclusions_; }
  const std::set<std::string>& pending() const noexcept { return pending_; }
  const std::vector<VoteTable>& history() const noexcept { return history_; }

  void record(VoteTable table) { history_.push_back(std::move(table)); }

private:
  std::size_t cap_;
  std::size_t max_iterations_;
  std::set<std::string> exclusions_;
  std::set<std::string> pending_;
  std::vector<VoteTable> history_;
};

struct IterationResult {
  SelectionSession session;
  VoteTable report;  // at most cap rows, plus pending variables
  EnsembleResult ensemble;
};

// One engineering-validation round: drop exclusions, run the ensemble, keep
// pending variables in the report, truncate to the cap.
IterationResult run_iteration(SelectionSession session, const Table& table, const std::string& response,
                              const EnsembleConfig& config);

// The first `cap` rows in table order, with every pending variable kept.
VoteTable truncate_report(const VoteTable& table, std::size_t cap);

std::vector<std::string> read_name_list(const std::string& path);

}  // namespace mfg
