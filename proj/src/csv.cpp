#include "mfgpipe/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mfgpipe/error.hpp"

namespace mfg {

namespace {

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<Timestamp> parse_epoch(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  Timestamp v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
  // "1.5e9"-style epochs: accept and truncate sub-second precision.
  if (auto d = parse_number(s)) return static_cast<Timestamp>(std::trunc(*d));
  return std::nullopt;
}

std::optional<bool> parse_bool(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "true") return true;
  if (lower == "false") return false;
  return std::nullopt;
}

std::optional<Timestamp> parse_timestamp_token(std::string_view s, bool allow_epoch) {
  if (auto t = parse_iso8601(s)) return t;
  if (allow_epoch) return parse_epoch(s);
  return std::nullopt;
}

struct RawColumn {
  std::string name;
  std::vector<std::string> tokens;
  std::vector<std::uint8_t> missing;
};

ColumnKind infer_kind(const RawColumn& raw) {
  auto all = [&](auto&& pred) {
    for (std::size_t i = 0; i < raw.tokens.size(); ++i)
      if (!raw.missing[i] && !pred(raw.tokens[i])) return false;
    return true;
  };
  if (all([](const std::string& t) { return parse_number(t).has_value(); })) return ColumnKind::Numeric;
  if (all([](const std::string& t) { return parse_iso8601(t).has_value(); })) return ColumnKind::Timestamp;
  if (all([](const std::string& t) { return parse_bool(t).has_value(); })) return ColumnKind::Boolean;
  return ColumnKind::Categorical;
}

[[noreturn]] void bad_token(const RawColumn& raw, std::size_t row, ColumnKind kind) {
  throw ValidationError("column '" + raw.name + "', data row " + std::to_string(row + 1) + ": cannot parse '" +
                        raw.tokens[row] + "' as " + std::string(to_string(kind)));
}

Column build_column(RawColumn raw, ColumnKind kind) {
  const std::size_t n = raw.tokens.size();
  switch (kind) {
    case ColumnKind::Numeric: {
      std::vector<double> values(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (raw.missing[i]) continue;
        auto v = parse_number(raw.tokens[i]);
        if (!v) bad_token(raw, i, kind);
        values[i] = *v;
      }
      return Column::numeric(raw.name, std::move(values), std::move(raw.missing));
    }
    case ColumnKind::Timestamp: {
      std::vector<Timestamp> values(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (raw.missing[i]) continue;
        auto v = parse_timestamp_token(raw.tokens[i], true);
        if (!v) bad_token(raw, i, kind);
        values[i] = *v;
      }
      return Column::timestamp(raw.name, std::move(values), std::move(raw.missing));
    }
    case ColumnKind::Boolean: {
      std::vector<bool> values(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        if (raw.missing[i]) continue;
        auto v = parse_bool(raw.tokens[i]);
        if (!v) {
          // 0/1 is only accepted for booleans by explicit hint.
          if (raw.tokens[i] == "1") v = true;
          else if (raw.tokens[i] == "0") v = false;
          else bad_token(raw, i, kind);
        }
        values[i] = *v;
      }
      return Column::boolean(raw.name, std::move(values), std::move(raw.missing));
    }
    case ColumnKind::Categorical: {
      std::vector<std::optional<std::string>> values(n);
      for (std::size_t i = 0; i < n; ++i)
        if (!raw.missing[i]) values[i] = std::move(raw.tokens[i]);
      return Column::categorical(raw.name, values);
    }
  }
  throw std::logic_error("unreachable column kind");
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void write_field(std::ostream& out, std::string_view s) { out << csv_field(s); }

}  // namespace

std::string csv_field(std::string_view s) {
  if (!needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;  // distinguishes an empty trailing field from no field
  bool quoted_field = false;
  char c;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    quoted_field = false;
  };
  auto end_record = [&] {
    if (field_started || !record.empty()) end_field();
    if (!record.empty()) records.push_back(std::move(record));
    record.clear();
  };

  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !quoted_field && !field.empty())
          throw ValidationError("malformed CSV: quote inside unquoted field");
        in_quotes = true;
        quoted_field = true;
        field_started = true;
        break;
      case ',':
        field_started = true;
        end_field();
        field_started = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw ValidationError("malformed CSV: unterminated quoted field");
  end_record();
  return records;
}

Table read_csv(std::istream& in, const CsvReadOptions& options, std::string name) {
  auto records = parse_csv_records(in);
  if (records.empty()) throw ValidationError("CSV has no header row");

  auto& header = records.front();
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  std::unordered_set<std::string> seen;
  for (const auto& h : header)
    if (!seen.insert(h).second) throw ValidationError("duplicate header name '" + h + "'");
  for (const auto& [hint, kind] : options.schema_hints)
    if (!seen.contains(hint)) throw ValidationError("schema hint for unknown column '" + hint + "'");

  const std::size_t width = header.size();
  const std::size_t rows = records.size() - 1;
  std::vector<RawColumn> raw(width);
  for (std::size_t j = 0; j < width; ++j) {
    raw[j].name = header[j];
    raw[j].tokens.resize(rows);
    raw[j].missing.resize(rows, 0);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    auto& rec = records[r + 1];
    if (rec.size() != width)
      throw ValidationError("CSV data row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " fields, header has " + std::to_string(width));
    for (std::size_t j = 0; j < width; ++j) {
      raw[j].missing[r] = options.missing_tokens.contains(rec[j]) ? 1 : 0;
      raw[j].tokens[r] = std::move(rec[j]);
    }
  }

  std::vector<Column> columns;
  columns.reserve(width);
  for (auto& rc : raw) {
    auto hint = options.schema_hints.find(rc.name);
    const ColumnKind kind = hint != options.schema_hints.end() ? hint->second : infer_kind(rc);
    columns.push_back(build_column(std::move(rc), kind));
  }
  return Table(std::move(name), std::move(columns), rows);
}

Table read_csv(const std::filesystem::path& path, const CsvReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  return read_csv(in, options, path.stem().string());
}

void write_csv(std::ostream& out, const Table& table, const CsvWriteOptions& options) {
  const auto& cols = table.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (j) out << ',';
    write_field(out, cols[j].name());
  }
  out << '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out << ',';
      const std::string cell = cols[j].is_missing(r) ? options.missing_token : cols[j].render(r);
      // A lone empty field would read back as a blank line.
      if (cols.size() == 1 && cell.empty())
        out << "\"\"";
      else
        write_field(out, cell);
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Table& table, const CsvWriteOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_csv(out, table, options);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::set<std::string, std::less<>> parse_missing_tokens(const std::string& comma_list) {
  std::set<std::string, std::less<>> tokens;
  std::stringstream ss(comma_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) tokens.insert(tok);
  if (!comma_list.empty() && comma_list.back() == ',') tokens.insert("");
  if (comma_list.empty()) tokens.insert("");
  return tokens;
}

}  // namespace mfg
