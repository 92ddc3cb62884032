#include "mfgpipe/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mfgpipe/csv.hpp"
#include "mfgpipe/error.hpp"

namespace mfg {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text") return ReportFormat::Text;
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  throw ValidationError("unknown report format '" + std::string(text) + "' (expected text, json or csv)");
}

namespace {

using Grid = std::vector<std::vector<std::string>>;

std::string fixed(double v, int digits = 2) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string percent(const std::optional<double>& v) { return v ? fixed(100.0 * *v, 1) + "%" : "undefined"; }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no infinity; non-finite values become strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json header(std::string_view kind) { return json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

// First column left aligned, the rest right aligned, two-space gutters.
std::string render_text(const Grid& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::string render_csv(const Grid& grid) {
  std::string out;
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      out += csv_field(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::string render(const Grid& text, const Grid& csv, const json& doc, ReportFormat format,
                   const std::string& footer = {}) {
  switch (format) {
    case ReportFormat::Text: return render_text(text) + footer;
    case ReportFormat::Csv: return render_csv(csv);
    case ReportFormat::Json: return doc.dump(2) + '\n';
  }
  throw std::logic_error("unreachable report format");
}

std::string shortest(double v) {
  if (!std::isfinite(v)) return fixed(v);
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

// ------------------------------------------------------------ votes

json to_json(const VoteTable& votes) {
  json doc = header("votes");
  doc["selectors"] = votes.selectors;
  json rows = json::array();
  for (const auto& r : votes.rows) {
    json flags = json::object();
    for (std::size_t s = 0; s < votes.selectors.size(); ++s) flags[votes.selectors[s]] = r.flags[s];
    rows.push_back({{"variable", r.variable}, {"flags", flags}, {"votes", r.votes}, {"mean_rank", r.mean_rank},
                    {"pending", r.pending}});
  }
  doc["rows"] = std::move(rows);
  return doc;
}

std::string emit_report(const VoteTable& votes, ReportFormat format) {
  bool any_pending = false;
  for (const auto& r : votes.rows) any_pending = any_pending || r.pending;

  Grid text{{"Variable"}}, csv{{"variable"}};
  for (const auto& s : votes.selectors) {
    text[0].push_back(selector_display_name(s));
    csv[0].push_back(s);
  }
  text[0].push_back("Votes");
  csv[0].push_back("votes");
  if (any_pending) csv[0].push_back("pending");
  for (const auto& r : votes.rows) {
    std::vector<std::string> row{r.pending ? r.variable + " (pending)" : r.variable};
    std::vector<std::string> crow{r.variable};
    for (auto f : r.flags) {
      row.push_back(std::to_string(f));
      crow.push_back(std::to_string(f));
    }
    row.push_back(std::to_string(r.votes));
    crow.push_back(std::to_string(r.votes));
    if (any_pending) crow.push_back(r.pending ? "1" : "0");
    text.push_back(std::move(row));
    csv.push_back(std::move(crow));
  }
  return render(text, csv, to_json(votes), format);
}

// ------------------------------------------------------------ metrics

json to_json(const std::vector<NamedMetrics>& models) {
  json doc = header("metrics");
  json rows = json::array();
  for (const auto& m : models) {
    const auto& cm = m.confusion;
    rows.push_back({{"model", m.model},
                    {"confusion", {{"positive_label", cm.positive_label}, {"tp", cm.tp}, {"fp", cm.fp},
                                   {"fn", cm.fn}, {"tn", cm.tn}}},
                    {"accuracy", optional_number(m.metrics.accuracy)},
                    {"recall", optional_number(m.metrics.recall)},
                    {"specificity", optional_number(m.metrics.specificity)},
                    {"precision", optional_number(m.metrics.precision)},
                    {"f1", optional_number(m.metrics.f1)},
                    {"auc", optional_number(m.metrics.auc)},
                    {"balanced_accuracy", optional_number(m.metrics.balanced_accuracy)}});
  }
  doc["models"] = std::move(rows);
  return doc;
}

std::string emit_report(const std::vector<NamedMetrics>& models, ReportFormat format) {
  Grid text{{"Model", "Accuracy", "Recall/Sensitivity", "Specificity", "Precision", "F1 Score", "AUC"}};
  Grid csv{{"model", "accuracy", "recall", "specificity", "precision", "f1", "auc", "balanced_accuracy"}};
  auto cell = [](const std::optional<double>& v) { return v ? shortest(*v) : std::string{}; };
  for (const auto& m : models) {
    const auto& s = m.metrics;
    text.push_back({m.model, percent(s.accuracy), percent(s.recall), percent(s.specificity), percent(s.precision),
                    percent(s.f1), s.auc ? percent(s.auc) : "n/a"});
    csv.push_back({m.model, cell(s.accuracy), cell(s.recall), cell(s.specificity), cell(s.precision), cell(s.f1),
                   cell(s.auc), cell(s.balanced_accuracy)});
  }

  // Confusion blocks laid out predicted (rows) against truth (columns).
  std::string blocks;
  for (const auto& m : models) {
    const auto& cm = m.confusion;
    const std::string pos = cm.positive_label, neg = "not " + cm.positive_label;
    blocks += '\n' + m.model + '\n';
    blocks += render_text({{"", "True " + pos, "True " + neg},
                           {"Predicted " + pos, std::to_string(cm.tp), std::to_string(cm.fp)},
                           {"Predicted " + neg, std::to_string(cm.fn), std::to_string(cm.tn)}});
  }
  return render(text, csv, to_json(models), format, blocks);
}

// ------------------------------------------------------------ decisions

json to_json(const ExpectedCostReport& r) {
  json doc = header("expected_cost");
  doc["states"] = r.problem.states;
  doc["probabilities"] = std::vector<double>(r.problem.probabilities.begin(), r.problem.probabilities.end());
  doc["actions"] = r.problem.actions;
  json cost = json::array();
  for (Eigen::Index s = 0; s < r.problem.cost.rows(); ++s) {
    json row = json::array();
    for (Eigen::Index a = 0; a < r.problem.cost.cols(); ++a) row.push_back(r.problem.cost(s, a));
    cost.push_back(std::move(row));
  }
  doc["cost"] = std::move(cost);
  json expected = json::object();
  for (std::size_t a = 0; a < r.problem.actions.size(); ++a)
    expected[r.problem.actions[a]] = r.decision.expected_cost(static_cast<Eigen::Index>(a));
  doc["expected_cost"] = std::move(expected);
  doc["decision"] = r.problem.actions[r.decision.best];
  return doc;
}

std::string emit_report(const ExpectedCostReport& r, ReportFormat format) {
  const auto& p = r.problem;
  Grid grid{{"State", "Probability"}};
  for (const auto& a : p.actions) grid[0].push_back(a);
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    std::vector<std::string> row{p.states[s], shortest(p.probabilities(static_cast<Eigen::Index>(s)))};
    for (Eigen::Index a = 0; a < p.cost.cols(); ++a) row.push_back(shortest(p.cost(static_cast<Eigen::Index>(s), a)));
    grid.push_back(std::move(row));
  }
  std::vector<std::string> total{"Expected cost", ""};
  for (Eigen::Index a = 0; a < r.decision.expected_cost.size(); ++a) total.push_back(shortest(r.decision.expected_cost(a)));
  grid.push_back(std::move(total));
  Grid csv = grid;
  csv[0][0] = "state";
  csv[0][1] = "probability";
  csv.back()[0] = "expected_cost";
  csv.push_back({"decision", "", p.actions[r.decision.best]});
  return render(grid, csv, to_json(r), format, "Decision: " + p.actions[r.decision.best] + '\n');
}

json to_json(const RegretReport& r) {
  json doc = header("minimax_regret");
  doc["actions"] = r.payoffs.actions;
  doc["scenarios"] = r.payoffs.scenarios;
  json regret = json::object();
  for (std::size_t a = 0; a < r.payoffs.actions.size(); ++a) {
    json row = json::array();
    for (Eigen::Index s = 0; s < r.decision.regret.cols(); ++s) row.push_back(r.decision.regret(static_cast<Eigen::Index>(a), s));
    regret[r.payoffs.actions[a]] = std::move(row);
  }
  doc["regret"] = std::move(regret);
  doc["max_regret"] = std::vector<double>(r.decision.max_regret.begin(), r.decision.max_regret.end());
  doc["decision"] = r.payoffs.actions[r.decision.best];
  return doc;
}

std::string emit_report(const RegretReport& r, ReportFormat format) {
  Grid grid{{"Action"}};
  for (const auto& s : r.payoffs.scenarios) grid[0].push_back("Regret " + s);
  grid[0].push_back("Max regret");
  for (std::size_t a = 0; a < r.payoffs.actions.size(); ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    std::vector<std::string> row{r.payoffs.actions[a]};
    for (Eigen::Index s = 0; s < r.decision.regret.cols(); ++s) row.push_back(shortest(r.decision.regret(ai, s)));
    row.push_back(shortest(r.decision.max_regret(ai)));
    grid.push_back(std::move(row));
  }
  return render(grid, grid, to_json(r), format, "Decision: " + r.payoffs.actions[r.decision.best] + '\n');
}

json to_json(const ExpectedValueReport& r) {
  json doc = header("expected_value");
  doc["actions"] = r.payoffs.actions;
  doc["scenarios"] = r.payoffs.scenarios;
  json ev = json::object();
  for (std::size_t a = 0; a < r.payoffs.actions.size(); ++a)
    ev[r.payoffs.actions[a]] = r.decision.expected_value(static_cast<Eigen::Index>(a));
  doc["expected_value"] = std::move(ev);
  doc["decision"] = r.payoffs.actions[r.decision.best];
  return doc;
}

std::string emit_report(const ExpectedValueReport& r, ReportFormat format) {
  Grid grid{{"Action", "Expected value"}};
  for (std::size_t a = 0; a < r.payoffs.actions.size(); ++a)
    grid.push_back({r.payoffs.actions[a], shortest(r.decision.expected_value(static_cast<Eigen::Index>(a)))});
  return render(grid, grid, to_json(r), format, "Decision: " + r.payoffs.actions[r.decision.best] + '\n');
}

json to_json(const CostComparisonReport& r) {
  json doc = header("model_cost");
  doc["unit_costs"] = {{"type_i", r.unit_costs.type_i}, {"type_ii", r.unit_costs.type_ii},
                       {"correct", r.unit_costs.correct}};
  json totals = json::object();
  for (std::size_t m = 0; m < r.models.size(); ++m)
    totals[r.models[m]] = r.comparison.total_cost(static_cast<Eigen::Index>(m));
  doc["total_cost"] = std::move(totals);
  doc["decision"] = r.models[r.comparison.best];
  return doc;
}

std::string emit_report(const CostComparisonReport& r, ReportFormat format) {
  Grid grid{{"Model", "Total cost"}};
  for (std::size_t m = 0; m < r.models.size(); ++m)
    grid.push_back({r.models[m], shortest(r.comparison.total_cost(static_cast<Eigen::Index>(m)))});
  return render(grid, grid, to_json(r), format, "Decision: " + r.models[r.comparison.best] + '\n');
}

// ------------------------------------------------------------ other stages

json to_json(const MergeReport& r) {
  json doc = header("merge");
  doc["matched_rows"] = r.matched_rows;
  doc["unmatched_rows"] = r.unmatched_rows;
  json missing = json::object();
  for (const auto& [name, count] : r.missing_by_column) missing[name] = count;
  doc["missing_by_column"] = std::move(missing);
  doc["complete_case_rows"] = r.complete_case_rows;
  return doc;
}

json to_json(const DropReport& r) {
  json doc = header("clean");
  doc["threshold"] = r.threshold;
  json dropped = json::array();
  for (const auto& [name, fraction] : r.dropped) dropped.push_back({{"column", name}, {"missing_fraction", fraction}});
  doc["dropped"] = std::move(dropped);
  json proxies = json::array();
  for (const auto& p : r.proxies)
    proxies.push_back({{"dropped", p.dropped}, {"retained", p.retained}, {"abs_correlation", p.abs_correlation}});
  doc["proxies"] = std::move(proxies);
  return doc;
}

json to_json(const ScreenResult& r) {
  json doc = header("screen");
  doc["retained"] = r.retained;
  json tests = json::array();
  for (const auto& t : r.results) {
    json row{{"variable", t.variable}, {"test", to_string(t.test)}, {"statistic", number(t.statistic)},
             {"p_value", number(t.p_value)}, {"kept", t.kept}};
    if (!t.detail.empty()) row["detail"] = t.detail;
    tests.push_back(std::move(row));
  }
  doc["tests"] = std::move(tests);
  doc["constant"] = r.constant;
  doc["untested"] = r.untested;
  return doc;
}

std::string emit_report(const ScreenResult& r, ReportFormat format) {
  Grid grid{{"Variable", "Test", "Statistic", "p-value", "Kept"}};
  Grid csv{{"variable", "test", "statistic", "p_value", "kept", "detail"}};
  for (const auto& t : r.results) {
    const std::string name = t.detail.empty() ? t.variable : t.variable + " [" + t.detail + "]";
    grid.push_back({name, std::string(to_string(t.test)), fixed(t.statistic, 4), fixed(t.p_value, 4),
                    t.kept ? "yes" : "no"});
    csv.push_back({t.variable, std::string(to_string(t.test)), shortest(t.statistic), shortest(t.p_value),
                   t.kept ? "1" : "0", t.detail});
  }
  std::string footer;
  if (!r.constant.empty()) {
    footer += "Constant:";
    for (const auto& c : r.constant) footer += ' ' + c;
    footer += '\n';
  }
  if (!r.untested.empty()) {
    footer += "Untested:";
    for (const auto& c : r.untested) footer += ' ' + c;
    footer += '\n';
  }
  return render(grid, csv, to_json(r), format, footer);
}

json to_json(const VifReport& r) {
  json doc = header("vif");
  json values = json::object();
  for (std::size_t j = 0; j < r.names.size(); ++j) values[r.names[j]] = number(r.values(static_cast<Eigen::Index>(j)));
  doc["vif"] = std::move(values);
  doc["average_vif"] = number(r.average_vif);
  doc["infinite_count"] = r.infinite_count;
  doc["individual_flags"] = r.individual_flags;
  doc["average_flag"] = r.average_flag;
  doc["complete_cases"] = r.complete_cases;
  return doc;
}

std::string emit_report(const VifReport& r, ReportFormat format) {
  Grid grid{{"Variable", "VIF", "Flag"}};
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const double v = r.values(static_cast<Eigen::Index>(j));
    grid.push_back({r.names[j], fixed(v, 3), v > kVifIndividualLimit ? "> 10" : ""});
  }
  std::string footer = "Average VIF: " + fixed(r.average_vif, 3) + (r.average_flag ? " (> 6)" : "") + '\n';
  if (r.infinite_count > 0) footer += "Exactly dependent: " + std::to_string(r.infinite_count) + '\n';
  Grid csv{{"variable", "vif", "flag"}};
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const double v = r.values(static_cast<Eigen::Index>(j));
    csv.push_back({r.names[j], shortest(v), v > kVifIndividualLimit ? "1" : "0"});
  }
  return render(grid, csv, to_json(r), format, footer);
}

std::string decomposition_csv(const Series& series, const Decomposition& parts) {
  std::string out = "value,trend,seasonal,residual\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string{} : shortest(v); };
  for (Eigen::Index i = 0; i < series.values.size(); ++i)
    out += cell(series.values(i)) + ',' + cell(parts.trend.values(i)) + ',' + cell(parts.seasonal.values(i)) + ',' +
           cell(parts.residual.values(i)) + '\n';
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mfg
