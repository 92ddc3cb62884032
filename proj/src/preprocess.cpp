#include "mfgpipe/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mfgpipe/csv.hpp"
#include "mfgpipe/error.hpp"
#include "mfgpipe/stats.hpp"

namespace mfg {

namespace {

const Column& categorical_column(const Table& table, const std::string& name) {
  const Column& c = table.column(name);
  if (c.kind() != ColumnKind::Categorical) throw ValidationError("column '" + name + "' is not categorical");
  return c;
}

std::map<std::string, std::size_t> level_counts(const Column& c) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!c.is_missing(i)) ++counts[c.level(i)];
  return counts;
}

}  // namespace

DropResult drop_sparse_columns(const Table& table, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("sparse-column threshold must be in (0, 1]");
  DropResult result;
  result.report.threshold = threshold;
  std::vector<std::string> drop;
  for (const auto& c : table.columns()) {
    const double fraction = column_stats(c).missing_fraction;
    if (fraction > threshold) {
      drop.push_back(c.name());
      result.report.dropped.emplace_back(c.name(), fraction);
    }
  }
  result.table = table.without_columns(drop);
  return result;
}

DropReport proxy_report(const Table& before, DropReport report, double proxy_threshold) {
  std::vector<std::string> dropped_names;
  for (const auto& [name, fraction] : report.dropped) dropped_names.push_back(name);

  for (const auto& name : dropped_names) {
    const Column& d = before.column(name);
    if (d.kind() != ColumnKind::Numeric) continue;
    const VectorXd dv = d.to_vector();
    for (const auto& r : before.columns()) {
      if (r.kind() != ColumnKind::Numeric) continue;
      if (std::find(dropped_names.begin(), dropped_names.end(), r.name()) != dropped_names.end()) continue;
      const VectorXd rv = r.to_vector();
      Eigen::Index overlap = 0;
      for (Eigen::Index i = 0; i < dv.size(); ++i) overlap += (!is_missing(dv(i)) && !is_missing(rv(i))) ? 1 : 0;
      if (overlap < 3) continue;
      double corr;
      try {
        corr = std::abs(pearson_r(dv, rv));
      } catch (const ZeroVarianceError&) {
        continue;
      }
      if (corr >= proxy_threshold) report.proxies.push_back({name, r.name(), corr});
    }
  }
  return report;
}

HierarchyMapping read_hierarchy_csv(const std::filesystem::path& path, std::string column,
                                    std::optional<std::string> default_group) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read hierarchy file '" + path.string() + "'");
  HierarchyMapping m{std::move(column), {}, std::move(default_group)};
  const auto records = parse_csv_records(in);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (i == 0 && !rec.empty() && rec[0] == "level") continue;
    if (rec.size() != 2) throw ValidationError("hierarchy file: expected 2 fields per row");
    if (!m.mapping.emplace(rec[0], rec[1]).second)
      throw ValidationError("hierarchy file: level '" + rec[0] + "' mapped twice");
  }
  return m;
}

Table apply_concept_hierarchy(const Table& table, const HierarchyMapping& mapping) {
  const Column& c = categorical_column(table, mapping.column);
  std::vector<std::optional<std::string>> grouped(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.is_missing(i)) continue;
    auto it = mapping.mapping.find(c.level(i));
    if (it != mapping.mapping.end())
      grouped[i] = it->second;
    else if (mapping.default_group)
      grouped[i] = *mapping.default_group;
    else
      throw ValidationError("level '" + c.level(i) + "' of '" + c.name() + "' has no group and no default");
  }
  const auto pos = *table.find(mapping.column);
  const std::string names[] = {mapping.column};
  return table.without_columns(names).with_column_at(pos, Column::categorical(mapping.column, grouped));
}

SingletonResult drop_singleton_levels(const Table& table, const std::string& column) {
  const Column& c = categorical_column(table, column);
  const auto counts = level_counts(c);
  SingletonResult result;
  for (const auto& [level, n] : counts)
    if (n == 1) result.removed_levels.push_back(level);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.is_missing(i) || counts.at(c.level(i)) > 1) keep.push_back(i);
  result.table = table.select_rows(keep);
  return result;
}

Table dummy_encode(const Table& table, const std::string& column, std::optional<std::string> reference_level) {
  const Column& c = categorical_column(table, column);
  const auto counts = level_counts(c);
  if (counts.size() < 2) throw ValidationError("dummy_encode: '" + column + "' needs at least 2 observed levels");

  std::string reference;
  if (reference_level) {
    if (!counts.contains(*reference_level))
      throw ValidationError("reference level '" + *reference_level + "' not observed in '" + column + "'");
    reference = *reference_level;
  } else {
    std::size_t best = 0;
    for (const auto& [level, n] : counts)  // map order: ties keep the smallest level
      if (n > best) {
        best = n;
        reference = level;
      }
  }

  const auto pos = *table.find(column);
  const std::string drop[] = {column};
  Table out = table.without_columns(drop);
  std::size_t offset = 0;
  for (const auto& [level, n] : counts) {
    if (level == reference) continue;
    std::vector<bool> values(c.size(), false);
    std::vector<std::uint8_t> missing(c.size(), 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.is_missing(i))
        missing[i] = 1;
      else
        values[i] = c.level(i) == level;
    }
    out = out.with_column_at(pos + offset++, Column::boolean(column + "=" + level, std::move(values), std::move(missing)));
  }
  return out;
}

}  // namespace mfg
