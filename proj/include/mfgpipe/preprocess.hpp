#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mfgpipe/table.hpp"

namespace mfg {

struct ProxyPair {
  std::string dropped;
  std::string retained;
  double abs_correlation = 0.0;  // over pairwise-complete rows
};

struct DropReport {
  double threshold = 0.5;
  std::vector<std::pair<std::string, double>> dropped;  // (column, missing fraction)
  std::vector<ProxyPair> proxies;
};

struct DropResult {
  Table table;
  DropReport report;
};

// Removes every column whose missing fraction is strictly above `threshold`.
DropResult drop_sparse_columns(const Table& table, double threshold = 0.5);

// For each dropped numeric column, lists retained numeric columns it tracks
// with |r| >= proxy_threshold on at least 3 pairwise-complete rows.
DropReport proxy_report(const Table& table_before_drop, DropReport report, double proxy_threshold = 0.8);

struct HierarchyMapping {
  std::string column;
  std::map<std::string, std::string> mapping;  // level -> group
  std::optional<std::string> default_group;    // for levels absent from `mapping`
};

// Two-column CSV "level,group"; a header row is skipped when its first cell is "level".
HierarchyMapping read_hierarchy_csv(const std::filesystem::path& path, std::string column,
                                    std::optional<std::string> default_group = std::nullopt);

Table apply_concept_hierarchy(const Table& table, const HierarchyMapping& mapping);

struct SingletonResult {
  Table table;
  std::vector<std::string> removed_levels;  // sorted
};

// Drops the rows whose level is observed exactly once.
SingletonResult drop_singleton_levels(const Table& table, const std::string& column);

// Replaces a categorical column by L-1 boolean columns "column=level", in
// level order, omitting the reference level (default: most frequent, ties to
// the lexicographically smallest).
Table dummy_encode(const Table& table, const std::string& column,
                   std::optional<std::string> reference_level = std::nullopt);

}  // namespace mfg
