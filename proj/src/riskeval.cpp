#include "mfgpipe/riskeval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mfgpipe/csv.hpp"
#include "mfgpipe/error.hpp"

namespace mfg {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void check_probabilities(const VectorXd& p, Eigen::Index expected) {
  if (p.size() != expected) throw ValidationError("probability count does not match state count");
  if ((p.array() < 0.0).any() || p.hasNaN()) throw ValidationError("probabilities must be >= 0");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw ValidationError("probabilities must sum to 1");
}

template <class Better>
std::size_t arg_best(const VectorXd& v, Better better) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (better(v(i), v(static_cast<Eigen::Index>(best)))) best = static_cast<std::size_t>(i);
  return best;
}

std::size_t arg_min(const VectorXd& v) { return arg_best(v, std::less<>{}); }
std::size_t arg_max(const VectorXd& v) { return arg_best(v, std::greater<>{}); }

double parse_cell(const std::string& s, const std::string& where) {
  double v = 0.0;
  std::string_view sv = s;
  if (!sv.empty() && sv.front() == '$') sv.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (ec != std::errc{} || ptr != sv.data() + sv.size())
    throw ValidationError("decision file: cannot parse '" + s + "' (" + where + ")");
  return v;
}

struct DecisionTable {
  std::vector<std::string> states;
  std::optional<VectorXd> probabilities;
  std::vector<std::string> actions;
  MatrixXd values;  // states x actions
};

DecisionTable read_decision_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  const auto records = parse_csv_records(in);
  if (records.size() < 2) throw ValidationError("decision file needs a header and at least one state row");
  const auto& header = records.front();
  std::string second = header.size() > 1 ? header[1] : "";
  std::transform(second.begin(), second.end(), second.begin(), [](unsigned char c) { return std::tolower(c); });
  const bool has_prob = second == "probability" || second == "prob" || second == "p";
  const std::size_t first_action = has_prob ? 2 : 1;
  if (header.size() <= first_action) throw ValidationError("decision file has no action columns");

  DecisionTable t;
  t.actions.assign(header.begin() + static_cast<std::ptrdiff_t>(first_action), header.end());
  const auto rows = static_cast<Eigen::Index>(records.size() - 1);
  t.values.resize(rows, static_cast<Eigen::Index>(t.actions.size()));
  VectorXd p(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r) + 1];
    if (rec.size() != header.size()) throw ValidationError("decision file: ragged row " + std::to_string(r + 1));
    t.states.push_back(rec[0]);
    if (has_prob) p(r) = parse_cell(rec[1], "probability of " + rec[0]);
    for (std::size_t a = 0; a < t.actions.size(); ++a)
      t.values(r, static_cast<Eigen::Index>(a)) = parse_cell(rec[first_action + a], rec[0] + "/" + t.actions[a]);
  }
  if (has_prob) t.probabilities = std::move(p);
  return t;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const std::string> predicted, std::span<const std::string> actual,
                                 const std::string& positive) {
  if (predicted.size() != actual.size()) throw ValidationError("confusion_matrix: length mismatch");
  if (predicted.empty()) throw ValidationError("confusion_matrix: no observations");
  bool seen = false;
  ConfusionMatrix cm{positive};
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].empty() || actual[i].empty())
      throw ValidationError("confusion_matrix: missing label in row " + std::to_string(i + 1));
    const bool p = predicted[i] == positive, a = actual[i] == positive;
    seen = seen || p || a;
    if (p && a) ++cm.tp;
    else if (p) ++cm.fp;
    else if (a) ++cm.fn;
    else ++cm.tn;
  }
  if (!seen) throw ValidationError("confusion_matrix: positive label '" + positive + "' never occurs");
  return cm;
}

MetricSet classification_metrics(const ConfusionMatrix& cm) {
  MetricSet m;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  if (m.recall && m.specificity) m.balanced_accuracy = 0.5 * (*m.recall + *m.specificity);
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_positive) {
  if (scores.size() != is_positive.size()) throw ValidationError("roc_auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (is_positive[order[k]]) {
        positive_rank_sum += midrank;
        n_pos += 1.0;
      } else {
        n_neg += 1.0;
      }
    }
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw ValidationError("roc_auc: both classes must be present");
  return (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double roc_auc(std::span<const double> scores, std::span<const std::string> labels, const std::string& positive) {
  std::vector<std::uint8_t> flags(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] == positive;
  return roc_auc(scores, flags);
}

void DecisionProblem::validate() const {
  if (actions.empty()) throw ValidationError("decision problem has no actions");
  if (states.empty()) throw ValidationError("decision problem has no states");
  if (cost.rows() != static_cast<Eigen::Index>(states.size()) ||
      cost.cols() != static_cast<Eigen::Index>(actions.size()))
    throw ValidationError("cost matrix must be states x actions");
  check_probabilities(probabilities, cost.rows());
}

ExpectedCostDecision expected_cost_decision(const DecisionProblem& problem) {
  problem.validate();
  ExpectedCostDecision d;
  d.expected_cost = problem.cost.transpose() * problem.probabilities;
  d.best = arg_min(d.expected_cost);
  return d;
}

void ScenarioPayoff::validate() const {
  if (payoff.size() == 0) throw ValidationError("payoff matrix is empty");
  if (payoff.rows() != static_cast<Eigen::Index>(actions.size()) ||
      payoff.cols() != static_cast<Eigen::Index>(scenarios.size()))
    throw ValidationError("payoff matrix must be actions x scenarios");
  if (probabilities) check_probabilities(*probabilities, payoff.cols());
}

RegretDecision minimax_regret_decision(const ScenarioPayoff& payoffs) {
  payoffs.validate();
  RegretDecision d;
  const Eigen::RowVectorXd best_per_scenario = payoffs.payoff.colwise().maxCoeff();
  d.regret = (-payoffs.payoff).rowwise() + best_per_scenario;
  d.max_regret = d.regret.rowwise().maxCoeff();
  d.best = arg_min(d.max_regret);
  return d;
}

ExpectedValueDecision expected_value_choice(const ScenarioPayoff& payoffs) {
  payoffs.validate();
  if (!payoffs.probabilities) throw ValidationError("expected value choice needs scenario probabilities");
  ExpectedValueDecision d;
  d.expected_value = payoffs.payoff * *payoffs.probabilities;
  d.best = arg_max(d.expected_value);
  return d;
}

ModelCostComparison compare_models_by_cost(std::span<const ConfusionMatrix> models, const UnitCosts& costs) {
  if (models.empty()) throw ValidationError("no models to compare");
  for (const auto& m : models)
    if (m.positive_label != models.front().positive_label)
      throw ValidationError("models disagree on the positive label");
  ModelCostComparison c;
  c.total_cost.resize(static_cast<Eigen::Index>(models.size()));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    c.total_cost(static_cast<Eigen::Index>(i)) = static_cast<double>(m.fp) * costs.type_i +
                                                 static_cast<double>(m.fn) * costs.type_ii +
                                                 static_cast<double>(m.tp + m.tn) * costs.correct;
  }
  c.best = arg_min(c.total_cost);
  return c;
}

DecisionProblem read_decision_problem(const std::filesystem::path& path) {
  auto t = read_decision_table(path);
  if (!t.probabilities) throw ValidationError("decision problem file needs a probability column");
  DecisionProblem p{std::move(t.states), std::move(*t.probabilities), std::move(t.actions), std::move(t.values)};
  p.validate();
  return p;
}

ScenarioPayoff read_scenario_payoff(const std::filesystem::path& path) {
  auto t = read_decision_table(path);
  ScenarioPayoff s{std::move(t.actions), std::move(t.states), t.values.transpose(), std::move(t.probabilities)};
  s.validate();
  return s;
}

}  // namespace mfg
