#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mfgpipe/table.hpp"

namespace mfg {

enum class MergeMethod {
  Nearest,       // minimal |dt|, ties go to the earlier record
  RollForward,   // latest record at or before the main time
  RollBackward,  // earliest record at or after the main time
};

std::string_view to_string(MergeMethod method);
MergeMethod parse_merge_method(std::string_view text);  // "nearest", "roll-forward", "roll-backward"

struct MergeSpec {
  std::vector<std::string> key_columns;
  std::string main_time;
  std::string other_time;
  MergeMethod method = MergeMethod::Nearest;
  std::optional<Timestamp> tolerance;  // seconds; candidates with |dt| > tolerance are ignored
  std::optional<std::vector<std::string>> columns_to_bring;  // default: every non-key, non-time column
};

struct MergeReport {
  std::size_t matched_rows = 0;
  std::size_t unmatched_rows = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_by_column;  // per brought column, after merge
  std::size_t complete_case_rows = 0;  // over every column of the merged table
};

struct MergeResult {
  Table table;
  MergeReport report;
};

// As-of join. The output keeps main's rows in order and appends the brought
// columns. Other-table rows with a missing key or time never match.
MergeResult asof_merge(const Table& main, const Table& other, const MergeSpec& spec);

struct MergeSource {
  Table table;
  MergeSpec spec;
};

struct RemergeReport {
  std::vector<MergeReport> sources;      // one per source that contributed a column
  std::size_t complete_case_rows = 0;    // merged on the selected variables only
  std::size_t baseline_complete_case_rows = 0;  // same inputs, all columns brought
};

struct RemergeResult {
  Table table;
  RemergeReport report;
};

// Re-runs the merges bringing only the selected variables. Each selected name
// must belong to exactly one of main and the sources; names already in main
// stay where they are.
RemergeResult remerge_selected(const Table& main, const std::vector<MergeSource>& others,
                               const std::set<std::string>& selected_variables);

}  // namespace mfg
