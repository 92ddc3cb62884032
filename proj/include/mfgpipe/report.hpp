#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mfgpipe/decompose.hpp"
#include "mfgpipe/merge.hpp"
#include "mfgpipe/preprocess.hpp"
#include "mfgpipe/riskeval.hpp"
#include "mfgpipe/screen.hpp"
#include "mfgpipe/select.hpp"

namespace mfg {

inline constexpr int kSchemaVersion = 1;

enum class ReportFormat { Text, Json, Csv };

ReportFormat parse_report_format(std::string_view text);  // "text", "json", "csv"

struct NamedMetrics {
  std::string model;
  ConfusionMatrix confusion;
  MetricSet metrics;
};

struct ExpectedCostReport {
  DecisionProblem problem;
  ExpectedCostDecision decision;
};

struct RegretReport {
  ScenarioPayoff payoffs;
  RegretDecision decision;
};

struct ExpectedValueReport {
  ScenarioPayoff payoffs;
  ExpectedValueDecision decision;
};

struct CostComparisonReport {
  std::vector<std::string> models;
  UnitCosts unit_costs;
  ModelCostComparison comparison;
};

// JSON documents; every one carries "schema_version" and "kind".
nlohmann::json to_json(const VoteTable& votes);
nlohmann::json to_json(const std::vector<NamedMetrics>& models);
nlohmann::json to_json(const ExpectedCostReport& report);
nlohmann::json to_json(const RegretReport& report);
nlohmann::json to_json(const ExpectedValueReport& report);
nlohmann::json to_json(const CostComparisonReport& report);
nlohmann::json to_json(const MergeReport& report);
nlohmann::json to_json(const DropReport& report);
nlohmann::json to_json(const ScreenResult& result);
nlohmann::json to_json(const VifReport& report);

// Text renders a fixed-width table; Json pretty-prints to_json; Csv is one
// row per table line. Formats that make no sense for an artifact (CSV of a
// decision) fall back to the flattened table.
std::string emit_report(const VoteTable& votes, ReportFormat format);
std::string emit_report(const std::vector<NamedMetrics>& models, ReportFormat format);
std::string emit_report(const ExpectedCostReport& report, ReportFormat format);
std::string emit_report(const RegretReport& report, ReportFormat format);
std::string emit_report(const ExpectedValueReport& report, ReportFormat format);
std::string emit_report(const CostComparisonReport& report, ReportFormat format);
std::string emit_report(const ScreenResult& result, ReportFormat format);
std::string emit_report(const VifReport& report, ReportFormat format);

// value,trend,seasonal,residual with empty cells outside the valid range.
std::string decomposition_csv(const Series& series, const Decomposition& parts);

// Writes to a temporary sibling first, then renames over `path`.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mfg
