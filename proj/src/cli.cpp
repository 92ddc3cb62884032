#include "mfgpipe/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "mfgpipe/error.hpp"
#include "mfgpipe/pipeline.hpp"
#include "mfgpipe/report.hpp"

namespace mfg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outputs {
  std::string out;     // primary artifact
  std::string report;  // JSON report
};

struct Globals {
  std::string missing_tokens;
  std::vector<std::string> schema;  // col=kind
  std::string format = "text";
  bool quiet = false;
};

CsvReadOptions csv_options(const Globals& g) {
  CsvReadOptions opts;
  if (!g.missing_tokens.empty()) opts.missing_tokens = parse_missing_tokens(g.missing_tokens);
  for (const auto& entry : g.schema) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ValidationError("--schema expects column=kind, got '" + entry + "'");
    opts.schema_hints[entry.substr(0, eq)] = parse_column_kind(entry.substr(eq + 1));
  }
  return opts;
}

StageContext file_context(const CsvReadOptions& csv, std::uint64_t seed) {
  StageContext ctx;
  ctx.seed = seed;
  ctx.resolve_path = [](const std::string& p) { return fs::path(p); };
  ctx.artifact = [](const std::string& ref) -> const StageOutput& {
    throw ValidationError("stage reference '" + ref + "' is only valid inside a pipeline config");
  };
  ctx.load_table = [csv](const std::string& ref, const std::map<std::string, ColumnKind, std::less<>>& hints) {
    if (!ref.empty() && ref.front() == '@')
      throw ValidationError("stage reference '" + ref + "' is only valid inside a pipeline config");
    CsvReadOptions opts = csv;
    for (const auto& [col, kind] : hints) opts.schema_hints.try_emplace(col, kind);
    return read_csv(fs::path(ref), opts);
  };
  return ctx;
}

// Prints the stage result in the requested format and writes the artifacts.
void finish(const StageOutput& result, const Outputs& files, const Globals& g, bool json_is_primary,
            std::ostream& out) {
  const std::string doc = result.report.dump(2) + '\n';
  if (!files.out.empty()) {
    if (json_is_primary)
      write_text_file(files.out, doc);
    else if (result.table)
      write_csv(fs::path(files.out), *result.table);
    else if (result.csv)
      write_text_file(files.out, *result.csv);
  }
  if (!files.report.empty()) write_text_file(files.report, doc);
  if (g.quiet) return;
  if (g.format == "json")
    out << doc;
  else if (g.format == "csv" && result.csv)
    out << *result.csv;
  else
    out << result.text;
}

void add_in(CLI::App* cmd, std::string& in) { cmd->add_option("--in", in, "input CSV")->required(); }

// "name=tp,fp,fn,tn"
json parse_confusion(const std::string& text, std::size_t index) {
  std::string name = "Model " + std::to_string(index);
  std::string counts = text;
  if (auto eq = text.find('='); eq != std::string::npos) {
    name = text.substr(0, eq);
    counts = text.substr(eq + 1);
  }
  std::vector<std::size_t> v;
  std::stringstream ss(counts);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(part, &used);
      if (used != part.size() || n < 0) throw std::invalid_argument(part);
      v.push_back(static_cast<std::size_t>(n));
    } catch (const std::logic_error&) {
      throw ValidationError("--confusion: '" + part + "' is not a non-negative count");
    }
  }
  if (v.size() != 4) throw ValidationError("--confusion expects name=tp,fp,fn,tn");
  return {{"name", name}, {"tp", v[0]}, {"fp", v[1]}, {"fn", v[2]}, {"tn", v[3]}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mfgpipe: manufacturing data analysis pipeline", "mfgpipe"};
  app.set_version_flag("--version", "mfgpipe " + std::string(toolkit_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--missing-tokens", g.missing_tokens, "comma-separated cell values read as missing");
  app.add_option("--schema", g.schema, "column kind hint, column=numeric|categorical|timestamp|boolean");
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_flag("--quiet", g.quiet, "print nothing on success");

  json params = json::object();
  Outputs files;
  std::uint64_t seed = 42;
  std::string op;

  // merge
  std::string m_main, m_other, m_main_time, m_other_time, m_method;
  std::vector<std::string> m_keys, m_columns;
  double m_tolerance = -1.0;
  auto* merge = app.add_subcommand("merge", "as-of join of two time-stamped tables");
  merge->add_option("--main", m_main)->required();
  merge->add_option("--other", m_other)->required();
  merge->add_option("--key", m_keys, "key column(s)")->required()->delimiter(',');
  merge->add_option("--main-time", m_main_time)->required();
  merge->add_option("--other-time", m_other_time, "defaults to --main-time");
  merge->add_option("--method", m_method, "nearest | roll-forward | roll-backward")->required();
  merge->add_option("--tolerance", m_tolerance, "seconds");
  merge->add_option("--columns", m_columns, "columns to bring from --other")->delimiter(',');
  merge->add_option("--out", files.out, "merged CSV")->required();
  merge->add_option("--report", files.report, "JSON report");

  // clean
  std::string c_in, c_hierarchy, c_hierarchy_column, c_hierarchy_default;
  std::vector<std::string> c_singletons, c_dummies, c_reference;
  double c_threshold = 0.5, c_proxy = 0.8;
  auto* clean = app.add_subcommand("clean", "drop sparse columns, map hierarchies, encode dummies");
  add_in(clean, c_in);
  clean->add_option("--threshold", c_threshold, "drop columns with missing fraction above this");
  clean->add_option("--proxy-threshold", c_proxy, "|r| for proxy suggestions");
  clean->add_option("--hierarchy", c_hierarchy, "level,group CSV");
  clean->add_option("--hierarchy-column", c_hierarchy_column, "column the hierarchy applies to");
  clean->add_option("--hierarchy-default", c_hierarchy_default, "group for unmapped levels");
  clean->add_option("--singletons", c_singletons, "drop rows whose level occurs once")->delimiter(',');
  clean->add_option("--dummy", c_dummies, "categorical columns to dummy-encode")->delimiter(',');
  clean->add_option("--reference-level", c_reference, "LEVEL, or column=LEVEL with several --dummy columns");
  clean->add_option("--out", files.out, "cleaned CSV")->required();
  clean->add_option("--report", files.report, "JSON report");

  // screen
  std::string s_in, s_response, s_table_out;
  double s_rmin = 0.1, s_alpha = 0.05;
  auto* screen = app.add_subcommand("screen", "univariate quick filter against a response");
  add_in(screen, s_in);
  screen->add_option("--response", s_response)->required();
  screen->add_option("--r-min", s_rmin);
  screen->add_option("--alpha", s_alpha);
  screen->add_option("--out", files.out, "screen JSON")->required();
  screen->add_option("--table-out", s_table_out, "CSV of the columns that pass");

  // select
  std::string x_in, x_response, x_exclude;
  std::vector<std::string> x_pending;
  std::size_t x_cap = 30, x_top_k = 20, x_trees = 200;
  unsigned x_threads = 0;
  auto* select = app.add_subcommand("select", "ensemble variable selection with voting");
  add_in(select, x_in);
  select->add_option("--response", x_response)->required();
  select->add_option("--exclude", x_exclude, "file with one excluded variable per line");
  select->add_option("--pending", x_pending, "variables kept in view even if not selected")->delimiter(',');
  select->add_option("--cap", x_cap, "maximum reported variables");
  select->add_option("--top-k", x_top_k, "importance selectors pick this many");
  select->add_option("--trees", x_trees, "random forest size");
  select->add_option("--threads", x_threads, "forest worker threads (0 = all cores)");
  select->add_option("--seed", seed);
  select->add_option("--out", files.out, "votes CSV")->required();
  select->add_option("--report", files.report, "JSON report");

  // vif
  std::string v_in, v_response;
  std::vector<std::string> v_predictors;
  auto* vif = app.add_subcommand("vif", "variance inflation factors");
  add_in(vif, v_in);
  vif->add_option("--predictors", v_predictors, "default: every numeric column but --response")->delimiter(',');
  vif->add_option("--response", v_response);
  vif->add_option("--out", files.out, "VIF JSON")->required();

  // decompose
  std::string d_in, d_column, d_time;
  long d_period = 0;
  auto* decompose = app.add_subcommand("decompose", "classical additive decomposition");
  add_in(decompose, d_in);
  decompose->add_option("--column", d_column)->required();
  decompose->add_option("--time-column", d_time, "order rows by this timestamp column");
  decompose->add_option("--period", d_period)->required();
  decompose->add_option("--out", files.out, "value,trend,seasonal,residual CSV")->required();
  decompose->add_option("--report", files.report, "JSON report");

  // evaluate
  std::string e_in, e_actual, e_positive = "Fail";
  std::vector<std::string> e_confusion, e_predicted, e_score, e_names;
  std::optional<double> e_type_i, e_type_ii, e_correct;
  auto* evaluate = app.add_subcommand("evaluate", "confusion-matrix metrics and cost comparison");
  evaluate->add_option("--confusion", e_confusion, "name=tp,fp,fn,tn (repeatable)");
  evaluate->add_option("--in", e_in, "CSV with label columns");
  evaluate->add_option("--actual", e_actual);
  evaluate->add_option("--predicted", e_predicted)->delimiter(',');
  evaluate->add_option("--score", e_score, "score column per predicted column, for AUC")->delimiter(',');
  evaluate->add_option("--names", e_names)->delimiter(',');
  evaluate->add_option("--positive", e_positive);
  evaluate->add_option("--type-i-cost", e_type_i, "cost per false alarm");
  evaluate->add_option("--type-ii-cost", e_type_ii, "cost per miss");
  evaluate->add_option("--correct-cost", e_correct, "cost per correct call");
  evaluate->add_option("--out", files.out, "metrics JSON");

  // decide
  std::string k_in, k_mode;
  auto* decide = app.add_subcommand("decide", "decision under uncertainty from a cost or payoff table");
  decide->add_option("--mode", k_mode)->required()->check(
      CLI::IsMember({"expected-cost", "minimax-regret", "expected-value"}));
  decide->add_option("--in", k_in)->required();
  decide->add_option("--out", files.out, "decision JSON");

  // pipeline
  std::string p_config;
  auto* pipeline = app.add_subcommand("pipeline", "run a JSON-configured sequence of stages");
  pipeline->add_option("--config", p_config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const CsvReadOptions csv = csv_options(g);
    bool json_primary = false;

    if (*merge) {
      op = "merge";
      params = {{"main", m_main}, {"other", m_other}, {"key", m_keys}, {"main_time", m_main_time},
                {"other_time", m_other_time.empty() ? m_main_time : m_other_time}, {"method", m_method}};
      if (merge->count("--tolerance")) params["tolerance"] = m_tolerance;
      if (!m_columns.empty()) params["columns"] = m_columns;
    } else if (*clean) {
      op = "clean";
      params = {{"input", c_in}, {"threshold", c_threshold}, {"proxy_threshold", c_proxy}};
      if (!c_hierarchy.empty()) {
        if (c_hierarchy_column.empty()) throw ValidationError("--hierarchy needs --hierarchy-column");
        json h{{"column", c_hierarchy_column}, {"file", c_hierarchy}};
        if (!c_hierarchy_default.empty()) h["default"] = c_hierarchy_default;
        params["hierarchy"] = json::array({h});
      }
      if (!c_singletons.empty()) params["singletons"] = c_singletons;
      std::map<std::string, std::string> refs;
      for (const auto& r : c_reference) {
        const auto eq = r.find('=');
        if (eq != std::string::npos) {
          refs[r.substr(0, eq)] = r.substr(eq + 1);
        } else {
          if (c_dummies.size() != 1) throw ValidationError("--reference-level needs column=LEVEL with several --dummy columns");
          refs[c_dummies.front()] = r;
        }
      }
      json dummies = json::array();
      for (const auto& d : c_dummies) {
        json entry{{"column", d}};
        if (auto it = refs.find(d); it != refs.end()) entry["reference"] = it->second;
        dummies.push_back(entry);
      }
      for (const auto& [col, level] : refs)
        if (std::find(c_dummies.begin(), c_dummies.end(), col) == c_dummies.end())
          throw ValidationError("--reference-level for '" + col + "' which is not a --dummy column");
      if (!dummies.empty()) params["dummies"] = dummies;
    } else if (*screen) {
      op = "screen";
      params = {{"input", s_in}, {"response", s_response}, {"r_min", s_rmin}, {"alpha", s_alpha}};
      json_primary = true;
    } else if (*select) {
      op = "select";
      params = {{"input", x_in}, {"response", x_response}, {"cap", x_cap}, {"top_k", x_top_k},
                {"trees", x_trees}, {"threads", x_threads}};
      if (!x_exclude.empty()) params["exclude"] = x_exclude;
      if (!x_pending.empty()) params["pending"] = x_pending;
    } else if (*vif) {
      op = "vif";
      params = {{"input", v_in}};
      if (!v_predictors.empty()) params["predictors"] = v_predictors;
      if (!v_response.empty()) params["response"] = v_response;
      json_primary = true;
    } else if (*decompose) {
      op = "decompose";
      params = {{"input", d_in}, {"column", d_column}, {"period", d_period}};
      if (!d_time.empty()) params["time_column"] = d_time;
    } else if (*evaluate) {
      op = "evaluate";
      params = {{"positive", e_positive}};
      if (!e_confusion.empty()) {
        json models = json::array();
        for (std::size_t i = 0; i < e_confusion.size(); ++i) models.push_back(parse_confusion(e_confusion[i], i + 1));
        params["models"] = models;
      }
      if (!e_in.empty()) params["input"] = e_in;
      if (!e_actual.empty()) params["actual"] = e_actual;
      if (!e_predicted.empty()) params["predicted"] = e_predicted;
      if (!e_score.empty()) params["score"] = e_score;
      if (!e_names.empty()) params["names"] = e_names;
      if (e_type_i || e_type_ii || e_correct)
        params["unit_costs"] = {{"type_i", e_type_i.value_or(0.0)}, {"type_ii", e_type_ii.value_or(0.0)},
                                {"correct", e_correct.value_or(0.0)}};
      json_primary = true;
    } else if (*decide) {
      op = "decide";
      params = {{"input", k_in}, {"mode", k_mode}};
      json_primary = true;
    } else if (*pipeline) {
      const PipelineConfig config = load_pipeline_config(p_config);
      const RunManifest manifest = run_pipeline(config);
      if (!g.quiet) {
        if (g.format == "json") {
          out << to_json(manifest).dump(2) << '\n';
        } else {
          out << "Config digest: " << manifest.config_digest << '\n';
          for (const auto& s : manifest.stages)
            out << s.id << " (" << s.op << "): " << s.rows_in << "x" << s.cols_in << " -> " << s.rows_out << "x"
                << s.cols_out << '\n';
          out << "Outputs in " << config.output_dir.string() << '\n';
        }
      }
      return 0;
    }

    const StageOutput result = execute_stage(op, params, file_context(csv, seed));
    finish(result, files, g, json_primary, out);
    if (op == "screen" && !s_table_out.empty()) write_csv(fs::path(s_table_out), *result.table);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mfg
