#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfgpipe/linalg.hpp"

namespace mfg {

// Counts for a two-class problem. fp is a Type I error (false alarm), fn a
// Type II error (miss).
struct ConfusionMatrix {
  std::string positive_label = "Fail";
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  // The same counts read with the other class as positive.
  ConfusionMatrix swapped(std::string new_positive) const { return {std::move(new_positive), tn, fn, fp, tp}; }
};

// Empty labels count as missing and are rejected.
ConfusionMatrix confusion_matrix(std::span<const std::string> predicted, std::span<const std::string> actual,
                                 const std::string& positive);

// A metric whose denominator is zero stays std::nullopt.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> recall;  // sensitivity
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f1;
  std::optional<double> auc;                // only from scores
  std::optional<double> balanced_accuracy;  // (recall + specificity) / 2, single threshold
};

MetricSet classification_metrics(const ConfusionMatrix& cm);

// P(score of a random positive > score of a random negative), ties count 1/2.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_positive);
double roc_auc(std::span<const double> scores, std::span<const std::string> labels, const std::string& positive);

// Costs per state (rows) and action (columns); payoffs may be negative costs.
struct DecisionProblem {
  std::vector<std::string> states;
  VectorXd probabilities;
  std::vector<std::string> actions;
  MatrixXd cost;

  void validate() const;
};

struct ExpectedCostDecision {
  VectorXd expected_cost;  // per action
  std::size_t best = 0;    // argmin, first on ties
};

ExpectedCostDecision expected_cost_decision(const DecisionProblem& problem);

// Payoffs per action (rows) and scenario (columns), higher is better.
struct ScenarioPayoff {
  std::vector<std::string> actions;
  std::vector<std::string> scenarios;
  MatrixXd payoff;
  std::optional<VectorXd> probabilities;

  void validate() const;
};

struct RegretDecision {
  MatrixXd regret;       // actions x scenarios
  VectorXd max_regret;   // per action
  std::size_t best = 0;  // argmin of max_regret, first on ties
};

RegretDecision minimax_regret_decision(const ScenarioPayoff& payoffs);

struct ExpectedValueDecision {
  VectorXd expected_value;
  std::size_t best = 0;  // argmax, first on ties
};

ExpectedValueDecision expected_value_choice(const ScenarioPayoff& payoffs);

struct UnitCosts {
  double type_i = 0.0;   // per false positive
  double type_ii = 0.0;  // per false negative
  double correct = 0.0;  // per correct classification
};

struct ModelCostComparison {
  VectorXd total_cost;
  std::size_t best = 0;
};

ModelCostComparison compare_models_by_cost(std::span<const ConfusionMatrix> models, const UnitCosts& costs);

// Decision CSV: header "state,probability,<action>...", one row per state.
// The probability column may be absent for payoff tables.
DecisionProblem read_decision_problem(const std::filesystem::path& path);
ScenarioPayoff read_scenario_payoff(const std::filesystem::path& path);

}  // namespace mfg
