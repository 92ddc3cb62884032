#include "mfgpipe/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mfgpipe/decompose.hpp"
#include "mfgpipe/error.hpp"
#include "mfgpipe/merge.hpp"
#include "mfgpipe/preprocess.hpp"
#include "mfgpipe/random.hpp"
#include "mfgpipe/report.hpp"
#include "mfgpipe/riskeval.hpp"
#include "mfgpipe/screen.hpp"
#include "mfgpipe/select.hpp"

namespace mfg {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view toolkit_version() { return MFGPIPE_VERSION; }

// ------------------------------------------------------------ validation

namespace {

enum class Field { String, Number, Integer, Boolean, StringOrList, StringList, Objects, Object };

struct FieldSpec {
  Field type;
  bool required = false;
};

using Schema = std::map<std::string, FieldSpec, std::less<>>;

const std::map<std::string, Schema, std::less<>>& schemas() {
  static const std::map<std::string, Schema, std::less<>> all{
      {"merge",
       {{"main", {Field::String, true}},
        {"other", {Field::String, true}},
        {"key", {Field::StringOrList, true}},
        {"main_time", {Field::String, true}},
        {"other_time", {Field::String}},
        {"method", {Field::String, true}},
        {"tolerance", {Field::Number}},
        {"columns", {Field::StringList}}}},
      {"clean",
       {{"input", {Field::String, true}},
        {"threshold", {Field::Number}},
        {"proxy_threshold", {Field::Number}},
        {"hierarchy", {Field::Objects}},
        {"singletons", {Field::StringList}},
        {"dummies", {Field::Objects}}}},
      {"screen",
       {{"input", {Field::String, true}},
        {"response", {Field::String, true}},
        {"r_min", {Field::Number}},
        {"alpha", {Field::Number}}}},
      {"select",
       {{"input", {Field::String, true}},
        {"response", {Field::String, true}},
        {"exclude", {Field::StringOrList}},
        {"pending", {Field::StringOrList}},
        {"cap", {Field::Integer}},
        {"top_k", {Field::Integer}},
        {"trees", {Field::Integer}},
        {"threads", {Field::Integer}}}},
      {"vif",
       {{"input", {Field::String, true}},
        {"predictors", {Field::StringList}},
        {"predictors_from", {Field::String}},
        {"response", {Field::String}}}},
      {"decompose",
       {{"input", {Field::String, true}},
        {"column", {Field::String, true}},
        {"time_column", {Field::String}},
        {"period", {Field::Integer, true}}}},
      {"evaluate",
       {{"input", {Field::String}},
        {"models", {Field::Objects}},
        {"actual", {Field::String}},
        {"predicted", {Field::StringOrList}},
        {"score", {Field::StringOrList}},
        {"names", {Field::StringList}},
        {"positive", {Field::String}},
        {"unit_costs", {Field::Object}}}},
      {"decide", {{"input", {Field::String, true}}, {"mode", {Field::String, true}}}},
  };
  return all;
}

bool matches(const json& v, Field type) {
  switch (type) {
    case Field::String: return v.is_string();
    case Field::Number: return v.is_number();
    case Field::Integer: return v.is_number_integer() || (v.is_number() && std::floor(v.get<double>()) == v.get<double>());
    case Field::Boolean: return v.is_boolean();
    case Field::StringList:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_string()) return false;
      return true;
    case Field::StringOrList: return v.is_string() || matches(v, Field::StringList);
    case Field::Objects:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_object()) return false;
      return true;
    case Field::Object: return v.is_object();
  }
  return false;
}

std::string_view type_name(Field type) {
  switch (type) {
    case Field::String: return "a string";
    case Field::Number: return "a number";
    case Field::Integer: return "an integer";
    case Field::Boolean: return "a boolean";
    case Field::StringList: return "a list of strings";
    case Field::StringOrList: return "a string or a list of strings";
    case Field::Objects: return "a list of objects";
    case Field::Object: return "an object";
  }
  return "?";
}

std::vector<std::string> string_list(const json& v) {
  if (v.is_string()) return {v.get<std::string>()};
  return v.get<std::vector<std::string>>();
}

template <class T>
T get_or(const json& params, const char* key, T fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->get<T>();
}

bool is_ref(const std::string& s) { return !s.empty() && s.front() == '@'; }

}  // namespace

void validate_stage(const std::string& op, const json& params) {
  auto it = schemas().find(op);
  if (it == schemas().end()) throw ValidationError("unknown stage op '" + op + "'");
  if (!params.is_object()) throw ValidationError("stage parameters must be an object");
  const Schema& schema = it->second;
  for (const auto& [key, value] : params.items()) {
    auto f = schema.find(key);
    if (f == schema.end()) throw ValidationError("field '" + key + "': not a " + op + " parameter");
    if (!matches(value, f->second.type))
      throw ValidationError("field '" + key + "': expected " + std::string(type_name(f->second.type)));
  }
  for (const auto& [key, spec] : schema)
    if (spec.required && !params.contains(key)) throw ValidationError("field '" + key + "': required");

  if (op == "merge") parse_merge_method(params["method"].get<std::string>());
  if (op == "decide") {
    const auto mode = params["mode"].get<std::string>();
    if (mode != "expected-cost" && mode != "minimax-regret" && mode != "expected-value")
      throw ValidationError("field 'mode': expected expected-cost, minimax-regret or expected-value");
    if (is_ref(params["input"].get<std::string>())) throw ValidationError("field 'input': decide reads a file");
  }
  if (op == "evaluate") {
    const bool from_counts = params.contains("models");
    const bool from_labels = params.contains("predicted") || params.contains("actual");
    if (from_counts == from_labels)
      throw ValidationError("evaluate needs either 'models' or 'input' + 'actual' + 'predicted'");
    if (from_labels && !(params.contains("input") && params.contains("actual") && params.contains("predicted")))
      throw ValidationError("field 'input'/'actual'/'predicted': all three are required together");
    for (const auto& m : get_or<json>(params, "models", json::array()))
      for (const char* k : {"tp", "fp", "fn", "tn"})
        if (!m.contains(k) || !m[k].is_number_unsigned())
          throw ValidationError(std::string("field 'models': each model needs a non-negative integer '") + k + "'");
    if (params.contains("unit_costs"))
      for (const auto& [k, v] : params["unit_costs"].items()) {
        if (k != "type_i" && k != "type_ii" && k != "correct")
          throw ValidationError("field 'unit_costs': unknown entry '" + k + "'");
        if (!v.is_number()) throw ValidationError("field 'unit_costs': '" + k + "' must be a number");
      }
  }
  if (op == "vif" && params.contains("predictors") && params.contains("predictors_from"))
    throw ValidationError("field 'predictors_from': give either predictors or predictors_from");
  if (op == "clean") {
    for (const auto& h : get_or<json>(params, "hierarchy", json::array()))
      if (!h.contains("column") || !h.contains("file"))
        throw ValidationError("field 'hierarchy': each entry needs 'column' and 'file'");
    for (const auto& d : get_or<json>(params, "dummies", json::array()))
      if (!d.contains("column")) throw ValidationError("field 'dummies': each entry needs 'column'");
  }
}

// ------------------------------------------------------------ execution

namespace {

StageOutput table_output(Table table, const Table* input) {
  StageOutput out;
  if (input) {
    out.rows_in = input->row_count();
    out.cols_in = input->column_count();
  }
  out.rows_out = table.row_count();
  out.cols_out = table.column_count();
  out.table = std::move(table);
  return out;
}

void set_input_dims(StageOutput& out, const Table& input) {
  out.rows_in = input.row_count();
  out.cols_in = input.column_count();
}

StageOutput run_merge(const json& p, const StageContext& ctx) {
  MergeSpec spec;
  spec.key_columns = string_list(p["key"]);
  spec.main_time = p["main_time"].get<std::string>();
  spec.other_time = get_or<std::string>(p, "other_time", spec.main_time);
  spec.method = parse_merge_method(p["method"].get<std::string>());
  if (p.contains("tolerance")) {
    const double tol = p["tolerance"].get<double>();
    if (!(tol >= 0.0)) throw ValidationError("field 'tolerance': must be >= 0");
    spec.tolerance = static_cast<Timestamp>(std::llround(tol));
  }
  if (p.contains("columns")) spec.columns_to_bring = p["columns"].get<std::vector<std::string>>();

  const Table main = ctx.load_table(p["main"].get<std::string>(), {{spec.main_time, ColumnKind::Timestamp}});
  const Table other = ctx.load_table(p["other"].get<std::string>(), {{spec.other_time, ColumnKind::Timestamp}});
  MergeResult merged = asof_merge(main, other, spec);
  StageOutput out = table_output(std::move(merged.table), &main);
  out.report = to_json(merged.report);
  out.report["method"] = to_string(spec.method);
  out.text = "Matched rows: " + std::to_string(merged.report.matched_rows) +
             "\nUnmatched rows: " + std::to_string(merged.report.unmatched_rows) +
             "\nComplete cases: " + std::to_string(merged.report.complete_case_rows) + '\n';
  return out;
}

StageOutput run_clean(const json& p, const StageContext& ctx) {
  const Table input = ctx.load_table(p["input"].get<std::string>(), {});
  Table t = input;
  json applied = json::array();
  for (const auto& h : get_or<json>(p, "hierarchy", json::array())) {
    std::optional<std::string> fallback;
    if (h.contains("default")) fallback = h["default"].get<std::string>();
    const auto mapping =
        read_hierarchy_csv(ctx.resolve_path(h["file"].get<std::string>()), h["column"].get<std::string>(), fallback);
    t = apply_concept_hierarchy(t, mapping);
    applied.push_back(mapping.column);
  }
  const double threshold = get_or<double>(p, "threshold", 0.5);
  const double proxy_threshold = get_or<double>(p, "proxy_threshold", 0.8);
  DropResult dropped = drop_sparse_columns(t, threshold);
  dropped.report = proxy_report(t, std::move(dropped.report), proxy_threshold);
  t = std::move(dropped.table);

  json singletons = json::object();
  for (const auto& column : get_or<std::vector<std::string>>(p, "singletons", {})) {
    SingletonResult s = drop_singleton_levels(t, column);
    singletons[column] = s.removed_levels;
    t = std::move(s.table);
  }
  json dummies = json::array();
  for (const auto& d : get_or<json>(p, "dummies", json::array())) {
    std::optional<std::string> reference;
    if (d.contains("reference")) reference = d["reference"].get<std::string>();
    const auto column = d["column"].get<std::string>();
    t = dummy_encode(t, column, reference);
    dummies.push_back(column);
  }

  StageOutput out = table_output(std::move(t), &input);
  out.report = to_json(dropped.report);
  out.report["hierarchy_applied"] = std::move(applied);
  out.report["singleton_levels_removed"] = std::move(singletons);
  out.report["dummy_encoded"] = std::move(dummies);
  out.text = "Dropped columns: " + std::to_string(dropped.report.dropped.size()) +
             "\nRows: " + std::to_string(out.rows_in) + " -> " + std::to_string(out.rows_out) +
             "\nColumns: " + std::to_string(out.cols_in) + " -> " + std::to_string(out.cols_out) + '\n';
  return out;
}

StageOutput run_screen(const json& p, const StageContext& ctx) {
  const Table input = ctx.load_table(p["input"].get<std::string>(), {});
  ScreenRules rules;
  rules.r_min = get_or<double>(p, "r_min", rules.r_min);
  rules.alpha = get_or<double>(p, "alpha", rules.alpha);
  const ScreenResult result = quick_filter(input, p["response"].get<std::string>(), rules);

  std::vector<std::string> failed;
  for (const auto& r : result.results)
    if (!r.kept) failed.push_back(r.variable);
  StageOutput out = table_output(input.without_columns(failed), &input);
  out.report = to_json(result);
  out.text = emit_report(result, ReportFormat::Text);
  return out;
}

std::vector<std::string> names_from(const json& v, const StageContext& ctx) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (is_ref(s)) return ctx.artifact(s).variables;
    return read_name_list(ctx.resolve_path(s).string());
  }
  return v.get<std::vector<std::string>>();
}

StageOutput run_select(const json& p, const StageContext& ctx) {
  const Table input = ctx.load_table(p["input"].get<std::string>(), {});
  const auto response = p["response"].get<std::string>();
  SelectionSession session(get_or<std::size_t>(p, "cap", 30));
  if (p.contains("exclude")) session.exclude(names_from(p["exclude"], ctx));
  if (p.contains("pending")) session.keep_pending(names_from(p["pending"], ctx));

  EnsembleConfig config;
  config.seed = ctx.seed;
  config.top_k = get_or<std::size_t>(p, "top_k", config.top_k);
  config.forest.trees = get_or<std::size_t>(p, "trees", config.forest.trees);
  config.forest.threads = get_or<unsigned>(p, "threads", config.forest.threads);
  const IterationResult it = run_iteration(std::move(session), input, response, config);

  StageOutput out;
  set_input_dims(out, input);
  out.csv = emit_report(it.report, ReportFormat::Csv);
  out.report = to_json(it.report);
  out.report["response"] = response;
  out.report["rows_used"] = it.ensemble.rows_used;
  out.report["seed"] = ctx.seed;
  out.report["excluded"] = std::vector<std::string>(it.session.exclusions().begin(), it.session.exclusions().end());
  for (const auto& r : it.ensemble.results)
    if (!r.skipped.empty()) out.report["skipped"][r.selector] = r.skipped;
  out.text = emit_report(it.report, ReportFormat::Text);
  for (const auto& row : it.report.rows) out.variables.push_back(row.variable);
  out.rows_out = it.report.rows.size();
  out.cols_out = it.report.selectors.size() + 2;
  return out;
}

StageOutput run_vif(const json& p, const StageContext& ctx) {
  const Table input = ctx.load_table(p["input"].get<std::string>(), {});
  std::vector<std::string> predictors;
  if (p.contains("predictors")) {
    predictors = p["predictors"].get<std::vector<std::string>>();
  } else if (p.contains("predictors_from")) {
    for (const auto& v : ctx.artifact(p["predictors_from"].get<std::string>()).variables)
      if (input.has_column(v)) {
        const auto kind = input.column(v).kind();
        if (kind == ColumnKind::Numeric || kind == ColumnKind::Boolean) predictors.push_back(v);
      }
  } else {
    const auto response = get_or<std::string>(p, "response", "");
    for (const auto& c : input.columns())
      if (c.name() != response && (c.kind() == ColumnKind::Numeric || c.kind() == ColumnKind::Boolean))
        predictors.push_back(c.name());
  }
  const VifReport report = vif(input, predictors);
  StageOutput out;
  set_input_dims(out, input);
  out.report = to_json(report);
  out.text = emit_report(report, ReportFormat::Text);
  out.rows_out = report.names.size();
  out.cols_out = 2;
  return out;
}

StageOutput run_decompose(const json& p, const StageContext& ctx) {
  const auto time_column = get_or<std::string>(p, "time_column", "");
  std::map<std::string, ColumnKind, std::less<>> hints;
  if (!time_column.empty()) hints[time_column] = ColumnKind::Timestamp;
  const Table input = ctx.load_table(p["input"].get<std::string>(), hints);
  const Series series = series_from_table(input, p["column"].get<std::string>(), time_column);
  const auto period = p["period"].get<Eigen::Index>();
  const Decomposition parts = decompose_additive(series, period);

  double sq = 0.0;
  for (Eigen::Index i = parts.valid_begin; i < parts.valid_end; ++i)
    if (!std::isnan(parts.residual.values(i))) sq += parts.residual.values(i) * parts.residual.values(i);
  const auto valid = parts.valid_end - parts.valid_begin;
  const double rms = valid > 0 ? std::sqrt(sq / double(valid)) : 0.0;

  StageOutput out;
  set_input_dims(out, input);
  out.csv = decomposition_csv(series, parts);
  out.report = json{{"schema_version", kSchemaVersion}, {"kind", "decompose"},   {"column", p["column"]},
                    {"period", period},                  {"length", series.size()}, {"valid_begin", parts.valid_begin},
                    {"valid_end", parts.valid_end},      {"residual_rms", rms}};
  json seasonal = json::array();
  for (Eigen::Index k = 0; k < std::min(period, series.size()); ++k) seasonal.push_back(parts.seasonal.values(k));
  out.report["seasonal_pattern"] = std::move(seasonal);
  out.text = "Period: " + std::to_string(period) + "\nValid range: [" + std::to_string(parts.valid_begin) + ", " +
             std::to_string(parts.valid_end) + ")\n";
  out.rows_out = static_cast<std::size_t>(series.size());
  out.cols_out = 4;
  return out;
}

StageOutput run_evaluate(const json& p, const StageContext& ctx) {
  const auto positive = get_or<std::string>(p, "positive", "Fail");
  std::vector<NamedMetrics> models;
  StageOutput out;

  if (p.contains("models")) {
    std::size_t index = 0;
    for (const auto& m : p["models"]) {
      NamedMetrics nm;
      nm.model = m.contains("name") ? m["name"].get<std::string>() : "Model " + std::to_string(++index);
      nm.confusion = {positive, m["tp"].get<std::size_t>(), m["fp"].get<std::size_t>(), m["fn"].get<std::size_t>(),
                      m["tn"].get<std::size_t>()};
      nm.metrics = classification_metrics(nm.confusion);
      models.push_back(std::move(nm));
    }
  } else {
    const Table input = ctx.load_table(p["input"].get<std::string>(), {});
    set_input_dims(out, input);
    const auto actual_name = p["actual"].get<std::string>();
    const auto predicted = string_list(p["predicted"]);
    const auto scores = p.contains("score") ? string_list(p["score"]) : std::vector<std::string>{};
    const auto names = get_or<std::vector<std::string>>(p, "names", predicted);
    if (names.size() != predicted.size()) throw ValidationError("field 'names': one name per predicted column");
    if (!scores.empty() && scores.size() != predicted.size())
      throw ValidationError("field 'score': one score column per predicted column");

    auto labels = [&](const std::string& name) {
      const Column& c = input.column(name);
      std::vector<std::string> v(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) v[i] = c.is_missing(i) ? std::string{} : c.render(i);
      return v;
    };
    const auto actual = labels(actual_name);
    for (std::size_t m = 0; m < predicted.size(); ++m) {
      NamedMetrics nm;
      nm.model = names[m];
      nm.confusion = confusion_matrix(labels(predicted[m]), actual, positive);
      nm.metrics = classification_metrics(nm.confusion);
      if (!scores.empty()) {
        const Column& sc = input.column(scores[m]);
        std::vector<double> s;
        std::vector<std::string> a;
        for (std::size_t i = 0; i < sc.size(); ++i)
          if (!sc.is_missing(i) && !actual[i].empty()) {
            s.push_back(sc.as_double(i));
            a.push_back(actual[i]);
          }
        nm.metrics.auc = roc_auc(s, a, positive);
      }
      models.push_back(std::move(nm));
    }
  }

  out.report = to_json(models);
  out.text = emit_report(models, ReportFormat::Text);
  if (p.contains("unit_costs")) {
    CostComparisonReport cost;
    cost.unit_costs.type_i = get_or<double>(p["unit_costs"], "type_i", 0.0);
    cost.unit_costs.type_ii = get_or<double>(p["unit_costs"], "type_ii", 0.0);
    cost.unit_costs.correct = get_or<double>(p["unit_costs"], "correct", 0.0);
    std::vector<ConfusionMatrix> cms;
    for (const auto& m : models) {
      cost.models.push_back(m.model);
      cms.push_back(m.confusion);
    }
    cost.comparison = compare_models_by_cost(cms, cost.unit_costs);
    json cj = to_json(cost);
    cj.erase("schema_version");
    cj.erase("kind");
    out.report["cost"] = std::move(cj);
    out.text += '\n' + emit_report(cost, ReportFormat::Text);
  }
  out.rows_out = models.size();
  out.cols_out = 6;
  return out;
}

StageOutput run_decide(const json& p, const StageContext& ctx) {
  const fs::path path = ctx.resolve_path(p["input"].get<std::string>());
  const auto mode = p["mode"].get<std::string>();
  StageOutput out;
  if (mode == "expected-cost") {
    ExpectedCostReport r{read_decision_problem(path), {}};
    r.decision = expected_cost_decision(r.problem);
    out.report = to_json(r);
    out.text = emit_report(r, ReportFormat::Text);
    out.rows_in = r.problem.states.size();
    out.cols_in = r.problem.actions.size();
    out.rows_out = r.problem.actions.size();
  } else if (mode == "minimax-regret") {
    RegretReport r{read_scenario_payoff(path), {}};
    r.decision = minimax_regret_decision(r.payoffs);
    out.report = to_json(r);
    out.text = emit_report(r, ReportFormat::Text);
    out.rows_in = r.payoffs.scenarios.size();
    out.cols_in = r.payoffs.actions.size();
    out.rows_out = r.payoffs.actions.size();
  } else {
    ExpectedValueReport r{read_scenario_payoff(path), {}};
    r.decision = expected_value_choice(r.payoffs);
    out.report = to_json(r);
    out.text = emit_report(r, ReportFormat::Text);
    out.rows_in = r.payoffs.scenarios.size();
    out.cols_in = r.payoffs.actions.size();
    out.rows_out = r.payoffs.actions.size();
  }
  out.cols_out = 1;
  return out;
}

}  // namespace

StageOutput execute_stage(const std::string& op, const json& params, const StageContext& context) {
  validate_stage(op, params);
  if (op == "merge") return run_merge(params, context);
  if (op == "clean") return run_clean(params, context);
  if (op == "screen") return run_screen(params, context);
  if (op == "select") return run_select(params, context);
  if (op == "vif") return run_vif(params, context);
  if (op == "decompose") return run_decompose(params, context);
  if (op == "evaluate") return run_evaluate(params, context);
  return run_decide(params, context);
}

// ------------------------------------------------------------ config

namespace {

bool produces_table(const std::string& op) { return op == "merge" || op == "clean" || op == "screen"; }

struct InputRef {
  std::string value;
  bool names = false;  // a name list (select output or file) rather than a table
};

// Stage fields that name an input table, name list or file.
std::vector<InputRef> input_refs(const std::string& op, const json& p) {
  std::vector<InputRef> refs;
  for (const char* key : {"input", "main", "other", "predictors_from", "exclude", "pending"}) {
    auto it = p.find(key);
    if (it == p.end() || !it->is_string()) continue;
    const std::string k = key;
    refs.push_back({it->get<std::string>(), k == "predictors_from" || k == "exclude" || k == "pending"});
  }
  if (op == "clean")
    for (const auto& h : get_or<json>(p, "hierarchy", json::array())) refs.push_back({h["file"].get<std::string>(), true});
  return refs;
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("pipeline config must be a JSON object");
  static const std::set<std::string> top{"schema_version", "seed", "output_dir", "missing_tokens", "schema", "stages"};
  for (const auto& [key, value] : doc.items())
    if (!top.contains(key)) throw ValidationError("config field '" + key + "': unknown");

  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  if (doc.contains("schema_version") && doc["schema_version"] != kSchemaVersion)
    throw ValidationError("config field 'schema_version': expected " + std::to_string(kSchemaVersion));
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ValidationError("config field 'seed': expected a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (!doc.contains("output_dir") || !doc["output_dir"].is_string())
    throw ValidationError("config field 'output_dir': required string");
  cfg.output_dir = base_dir / doc["output_dir"].get<std::string>();
  if (doc.contains("missing_tokens")) {
    if (!matches(doc["missing_tokens"], Field::StringList))
      throw ValidationError("config field 'missing_tokens': expected a list of strings");
    cfg.csv.missing_tokens.clear();
    for (const auto& t : doc["missing_tokens"]) cfg.csv.missing_tokens.insert(t.get<std::string>());
  }
  if (doc.contains("schema")) {
    if (!doc["schema"].is_object()) throw ValidationError("config field 'schema': expected an object");
    for (const auto& [col, kind] : doc["schema"].items()) {
      if (!kind.is_string()) throw ValidationError("config field 'schema': kind of '" + col + "' must be a string");
      cfg.csv.schema_hints[col] = parse_column_kind(kind.get<std::string>());
    }
  }
  if (!doc.contains("stages") || !doc["stages"].is_array()) throw ValidationError("config field 'stages': required list");

  std::map<std::string, std::string> ops_by_id;
  std::size_t index = 0;
  for (const auto& s : doc["stages"]) {
    ++index;
    const std::string where = "stage " + std::to_string(index);
    if (!s.is_object() || !s.contains("op") || !s["op"].is_string())
      throw ValidationError(where + ": field 'op': required string");
    StageConfig stage;
    stage.op = s["op"].get<std::string>();
    stage.id = s.contains("id") ? (s["id"].is_string() ? s["id"].get<std::string>() : "") : stage.op;
    if (stage.id.empty() || stage.id.find_first_of("/\\@") != std::string::npos || stage.id == "manifest")
      throw ValidationError(where + ": field 'id': must be a plain, non-empty name");
    if (ops_by_id.contains(stage.id)) throw ValidationError(where + ": field 'id': duplicate '" + stage.id + "'");
    stage.params = s;
    stage.params.erase("op");
    stage.params.erase("id");
    try {
      validate_stage(stage.op, stage.params);
    } catch (const ValidationError& e) {
      throw ValidationError(where + " (" + stage.id + "): " + e.what());
    }
    for (const auto& [ref, names] : input_refs(stage.op, stage.params)) {
      if (is_ref(ref)) {
        auto it = ops_by_id.find(ref.substr(1));
        if (it == ops_by_id.end())
          throw ValidationError(where + " (" + stage.id + "): input '" + ref + "' is not an earlier stage");
        if (names ? it->second != "select" : !produces_table(it->second))
          throw ValidationError(where + " (" + stage.id + "): input '" + ref + "' has no usable output");
      } else if (!fs::exists(base_dir / ref)) {
        throw ValidationError(where + " (" + stage.id + "): input file '" + ref + "' does not exist");
      }
    }
    if (stage.op == "select" && !cfg.seed)
      throw ValidationError(where + " (" + stage.id + "): config field 'seed' is required with a select stage");
    ops_by_id[stage.id] = stage.op;
    cfg.stages.push_back(std::move(stage));
  }
  cfg.normalized = doc;
  cfg.normalized.erase("output_dir");  // where results land does not change them
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_pipeline_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string config_digest(const json& normalized) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : normalized.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const RunManifest& m) {
  json doc{{"schema_version", kSchemaVersion}, {"kind", "manifest"}, {"version", m.version},
           {"config_digest", m.config_digest}};
  doc["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  json stages = json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"id", s.id},
                      {"op", s.op},
                      {"seed", s.seed},
                      {"rows_in", s.rows_in},
                      {"cols_in", s.cols_in},
                      {"rows_out", s.rows_out},
                      {"cols_out", s.cols_out},
                      {"wall_seconds", s.wall_seconds},
                      {"outputs", s.outputs}});
  doc["stages"] = std::move(stages);
  if (m.failed_stage) doc["failed"] = {{"stage", *m.failed_stage}, {"error", m.error}};
  return doc;
}

RunManifest run_pipeline(const PipelineConfig& config) {
  RunManifest manifest;
  manifest.version = std::string(toolkit_version());
  manifest.config_digest = config_digest(config.normalized);
  manifest.seed = config.seed;
  fs::create_directories(config.output_dir);
  const fs::path manifest_path = config.output_dir / "manifest.json";

  std::map<std::string, StageOutput> done;
  StageContext ctx;
  ctx.resolve_path = [&](const std::string& p) { return config.base_dir / p; };
  ctx.artifact = [&](const std::string& ref) -> const StageOutput& {
    auto it = done.find(ref.substr(1));
    if (it == done.end()) throw ValidationError("unknown stage reference '" + ref + "'");
    return it->second;
  };
  ctx.load_table = [&](const std::string& ref, const std::map<std::string, ColumnKind, std::less<>>& hints) -> Table {
    if (is_ref(ref)) {
      const StageOutput& o = ctx.artifact(ref);
      if (!o.table) throw ValidationError("stage '" + ref.substr(1) + "' produced no table");
      return *o.table;
    }
    CsvReadOptions opts = config.csv;
    for (const auto& [col, kind] : hints) opts.schema_hints.try_emplace(col, kind);
    return read_csv(config.base_dir / ref, opts);
  };

  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageConfig& stage = config.stages[i];
    StageRecord rec;
    rec.id = stage.id;
    rec.op = stage.op;
    rec.seed = derive_seed(config.seed.value_or(0), i);
    ctx.seed = rec.seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      StageOutput out = execute_stage(stage.op, stage.params, ctx);
      if (out.table) {
        std::ostringstream os;
        write_csv(os, *out.table);
        out.csv = os.str();
      }
      if (out.csv) {
        write_text_file(config.output_dir / (stage.id + ".csv"), *out.csv);
        rec.outputs.push_back(stage.id + ".csv");
      }
      write_text_file(config.output_dir / (stage.id + ".json"), out.report.dump(2) + '\n');
      rec.outputs.push_back(stage.id + ".json");
      rec.rows_in = out.rows_in;
      rec.cols_in = out.cols_in;
      rec.rows_out = out.rows_out;
      rec.cols_out = out.cols_out;
      out.csv.reset();
      done.emplace(stage.id, std::move(out));
    } catch (const std::exception& e) {
      manifest.failed_stage = stage.id;
      manifest.error = e.what();
      write_text_file(manifest_path, to_json(manifest).dump(2) + '\n');
      throw;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.stages.push_back(std::move(rec));
  }
  write_text_file(manifest_path, to_json(manifest).dump(2) + '\n');
  return manifest;
}

}  // namespace mfg
