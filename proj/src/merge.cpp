#include "mfgpipe/merge.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "mfgpipe/error.hpp"

namespace mfg {

std::string_view to_string(MergeMethod method) {
  switch (method) {
    case MergeMethod::Nearest: return "nearest";
    case MergeMethod::RollForward: return "roll-forward";
    case MergeMethod::RollBackward: return "roll-backward";
  }
  return "?";
}

MergeMethod parse_merge_method(std::string_view text) {
  if (text == "nearest") return MergeMethod::Nearest;
  if (text == "roll-forward") return MergeMethod::RollForward;
  if (text == "roll-backward" || text == "roll-back") return MergeMethod::RollBackward;
  throw ValidationError("unknown merge method '" + std::string(text) + "'");
}

namespace {

constexpr char kKeySeparator = '\x1f';

std::optional<std::string> row_key(const std::vector<const Column*>& keys, std::size_t row) {
  std::string key;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (keys[j]->is_missing(row)) return std::nullopt;
    if (j) key += kKeySeparator;
    key += keys[j]->render(row);
  }
  return key;
}

struct Candidate {
  Timestamp time;
  std::size_t row;
};

const Column& timestamp_column(const Table& t, const std::string& name) {
  const Column& c = t.column(name);
  if (c.kind() != ColumnKind::Timestamp)
    throw ValidationError("time column '" + name + "' in '" + t.name() + "' is not a timestamp");
  return c;
}

std::vector<std::string> brought_columns(const Table& other, const MergeSpec& spec) {
  std::vector<std::string> out;
  if (spec.columns_to_bring) {
    for (const auto& c : *spec.columns_to_bring) {
      other.column(c);
      if (c == spec.other_time || std::find(spec.key_columns.begin(), spec.key_columns.end(), c) != spec.key_columns.end())
        throw ValidationError("cannot bring key or time column '" + c + "'");
      out.push_back(c);
    }
    return out;
  }
  for (const auto& c : other.columns()) {
    if (c.name() == spec.other_time) continue;
    if (std::find(spec.key_columns.begin(), spec.key_columns.end(), c.name()) != spec.key_columns.end()) continue;
    out.push_back(c.name());
  }
  return out;
}

std::optional<std::size_t> pick(const std::vector<Candidate>& cands, Timestamp t, const MergeSpec& spec) {
  // First candidate strictly after t; everything before it is <= t.
  auto after = std::upper_bound(cands.begin(), cands.end(), t,
                                [](Timestamp v, const Candidate& c) { return v < c.time; });
  const Candidate* past = after != cands.begin() ? &*std::prev(after) : nullptr;
  const Candidate* future = nullptr;
  if (past && past->time == t) {
    future = past;  // dt = 0 qualifies in both directions
  } else if (after != cands.end()) {
    future = &*after;
  }

  const Candidate* chosen = nullptr;
  switch (spec.method) {
    case MergeMethod::RollForward: chosen = past; break;
    case MergeMethod::RollBackward: chosen = future; break;
    case MergeMethod::Nearest:
      if (past && future)
        chosen = (t - past->time) <= (future->time - t) ? past : future;
      else
        chosen = past ? past : future;
      break;
  }
  if (!chosen) return std::nullopt;
  const Timestamp dt = chosen->time > t ? chosen->time - t : t - chosen->time;
  if (spec.tolerance && dt > *spec.tolerance) return std::nullopt;
  return chosen->row;
}

}  // namespace

MergeResult asof_merge(const Table& main, const Table& other, const MergeSpec& spec) {
  if (spec.tolerance && *spec.tolerance < 0) throw ValidationError("merge tolerance must be >= 0");
  if (spec.key_columns.empty()) throw ValidationError("merge needs at least one key column");

  std::vector<const Column*> main_keys, other_keys;
  for (const auto& k : spec.key_columns) {
    const Column& a = main.column(k);
    const Column& b = other.column(k);
    if (a.kind() != b.kind())
      throw ValidationError("key column '" + k + "' is " + std::string(to_string(a.kind())) + " in main but " +
                            std::string(to_string(b.kind())) + " in other");
    main_keys.push_back(&a);
    other_keys.push_back(&b);
  }
  const Column& main_time = timestamp_column(main, spec.main_time);
  const Column& other_time = timestamp_column(other, spec.other_time);
  const auto bring = brought_columns(other, spec);
  for (const auto& c : bring)
    if (main.has_column(c)) throw ValidationError("brought column '" + c + "' already exists in main table");

  std::unordered_map<std::string, std::vector<Candidate>> index;
  for (std::size_t r = 0; r < other.row_count(); ++r) {
    if (other_time.is_missing(r)) continue;
    auto key = row_key(other_keys, r);
    if (!key) continue;
    index[*key].push_back({other_time.timestamp_at(r), r});
  }
  for (auto& [key, cands] : index) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.time < b.time; });
    for (std::size_t i = 1; i < cands.size(); ++i)
      if (cands[i].time == cands[i - 1].time)
        throw ValidationError("duplicate (key, timestamp) in '" + other.name() + "' at time " +
                              format_timestamp(cands[i].time));
  }

  std::vector<std::optional<std::size_t>> match(main.row_count());
  MergeReport report;
  for (std::size_t r = 0; r < main.row_count(); ++r) {
    if (main_time.is_missing(r)) continue;
    auto key = row_key(main_keys, r);
    if (!key) continue;
    auto it = index.find(*key);
    if (it == index.end()) continue;
    match[r] = pick(it->second, main_time.timestamp_at(r), spec);
  }
  for (const auto& m : match) (m ? report.matched_rows : report.unmatched_rows)++;

  std::vector<Column> columns = main.columns();
  for (const auto& name : bring) {
    Column c = other.column(name).gather(match);
    report.missing_by_column.emplace_back(name, c.missing_count());
    columns.push_back(std::move(c));
  }
  Table merged(main.name(), std::move(columns), main.row_count());
  report.complete_case_rows = merged.complete_case_count();
  return {std::move(merged), std::move(report)};
}

RemergeResult remerge_selected(const Table& main, const std::vector<MergeSource>& others,
                               const std::set<std::string>& selected_variables) {
  std::vector<std::vector<std::string>> per_source(others.size());
  for (const auto& var : selected_variables) {
    std::size_t hits = main.has_column(var) ? 1 : 0;
    std::optional<std::size_t> source;
    for (std::size_t s = 0; s < others.size(); ++s) {
      const auto candidates = brought_columns(others[s].table, {others[s].spec.key_columns, others[s].spec.main_time,
                                                                others[s].spec.other_time, others[s].spec.method,
                                                                std::nullopt, std::nullopt});
      if (std::find(candidates.begin(), candidates.end(), var) != candidates.end()) {
        ++hits;
        source = s;
      }
    }
    if (hits == 0) throw ValidationError("selected variable '" + var + "' not found in any source");
    if (hits > 1) throw ValidationError("selected variable '" + var + "' found in multiple sources");
    if (source) per_source[*source].push_back(var);
  }

  RemergeResult result;
  Table current = main;
  Table baseline = main;
  for (std::size_t s = 0; s < others.size(); ++s) {
    MergeSpec all_spec = others[s].spec;
    all_spec.columns_to_bring.reset();
    baseline = asof_merge(baseline, others[s].table, all_spec).table;

    if (per_source[s].empty()) continue;
    // Keep the source's column order rather than the set's.
    std::vector<std::string> ordered;
    for (const auto& c : others[s].table.columns())
      if (std::find(per_source[s].begin(), per_source[s].end(), c.name()) != per_source[s].end())
        ordered.push_back(c.name());
    MergeSpec spec = others[s].spec;
    spec.columns_to_bring = std::move(ordered);
    auto merged = asof_merge(current, others[s].table, spec);
    current = std::move(merged.table);
    result.report.sources.push_back(std::move(merged.report));
  }
  result.report.complete_case_rows = current.complete_case_count();
  result.report.baseline_complete_case_rows = baseline.complete_case_count();
  result.table = std::move(current);
  return result;
}

}  // namespace mfg
