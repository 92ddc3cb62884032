#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfgpipe/csv.hpp"
#include "mfgpipe/table.hpp"

namespace mfg {

std::string_view toolkit_version();

// ------------------------------------------------------------ stages

inline const std::vector<std::string>& stage_ops() {
  static const std::vector<std::string> ops{"merge", "clean", "screen", "select", "vif", "decompose", "evaluate", "decide"};
  return ops;
}

struct StageOutput {
  std::optional<Table> table;      // handed to later stages, written as <id>.csv
  std::optional<std::string> csv;  // non-table CSV artifact (votes, decomposition)
  nlohmann::json report;           // written as <id>.json
  std::string text;                // human-readable rendering of the report
  std::vector<std::string> variables;  // select: reported variables in table order
  std::size_t rows_in = 0, cols_in = 0, rows_out = 0, cols_out = 0;
};

// Loads a table for a stage input: "@<stage id>" or a CSV path. `hints`
// adds schema hints on top of the run-wide ones (files only).
using TableLoader = std::function<Table(const std::string& ref, const std::map<std::string, ColumnKind, std::less<>>& hints)>;
using ArtifactLookup = std::function<const StageOutput&(const std::string& ref)>;

struct StageContext {
  TableLoader load_table;
  ArtifactLookup artifact;  // "@<stage id>" of any earlier stage
  std::function<std::filesystem::path(const std::string&)> resolve_path;
  std::uint64_t seed = 0;
};

// Checks the parameter object of one stage: known fields only, required
// fields present, value types right. Throws ValidationError naming the field.
void validate_stage(const std::string& op, const nlohmann::json& params);

// Runs one stage on already validated parameters.
StageOutput execute_stage(const std::string& op, const nlohmann::json& params, const StageContext& context);

// ------------------------------------------------------------ config + manifest

struct StageConfig {
  std::string id;
  std::string op;
  nlohmann::json params;  // the stage object minus "id" and "op"
};

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path base_dir;    // relative paths resolve here
  std::filesystem::path output_dir;
  CsvReadOptions csv;
  std::vector<StageConfig> stages;
  nlohmann::json normalized;         // digest input
};

PipelineConfig parse_pipeline_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// 64-bit FNV-1a of the compact, key-sorted JSON text, as 16 hex digits.
std::string config_digest(const nlohmann::json& normalized);

struct StageRecord {
  std::string id;
  std::string op;
  std::uint64_t seed = 0;
  std::size_t rows_in = 0, cols_in = 0, rows_out = 0, cols_out = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;  // file names inside the output directory
};

struct RunManifest {
  std::string version;
  std::string config_digest;
  std::optional<std::uint64_t> seed;
  std::vector<StageRecord> stages;
  std::optional<std::string> failed_stage;
  std::string error;
};

nlohmann::json to_json(const RunManifest& manifest);

// Runs the stages in order, writing each stage's artifacts and then
// manifest.json into the output directory. A failing stage leaves earlier
// artifacts untouched, records itself in the manifest and rethrows.
RunManifest run_pipeline(const PipelineConfig& config);

}  // namespace mfg
