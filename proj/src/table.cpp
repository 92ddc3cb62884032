#include "mfgpipe/table.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "mfgpipe/error.hpp"

namespace mfg {

namespace {

std::vector<std::uint8_t> mask_or_zero(std::vector<std::uint8_t> missing, std::size_t n,
                                       const std::string& name) {
  if (missing.empty()) return std::vector<std::uint8_t>(n, 0);
  if (missing.size() != n) throw ValidationError("column '" + name + "': missing mask length mismatch");
  return missing;
}

std::string render_double(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Timestamp: return "timestamp";
    case ColumnKind::Boolean: return "boolean";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "timestamp") return ColumnKind::Timestamp;
  if (text == "boolean") return ColumnKind::Boolean;
  throw ValidationError("unknown column kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- Column

Column Column::numeric(std::string name, std::vector<double> values, std::vector<std::uint8_t> missing) {
  Column c(std::move(name), ColumnKind::Numeric);
  c.missing_ = mask_or_zero(std::move(missing), values.size(), c.name_);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) c.missing_[i] = 1;
    if (c.missing_[i]) values[i] = 0.0;
  }
  c.numbers_ = std::move(values);
  return c;
}

Column Column::numeric_from_nan(std::string name, std::span<const double> values) {
  return numeric(std::move(name), std::vector<double>(values.begin(), values.end()));
}

Column Column::timestamp(std::string name, std::vector<Timestamp> values, std::vector<std::uint8_t> missing) {
  Column c(std::move(name), ColumnKind::Timestamp);
  c.missing_ = mask_or_zero(std::move(missing), values.size(), c.name_);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (c.missing_[i]) values[i] = 0;
  c.codes_ = std::move(values);
  return c;
}

Column Column::boolean(std::string name, std::vector<bool> values, std::vector<std::uint8_t> missing) {
  Column c(std::move(name), ColumnKind::Boolean);
  c.missing_ = mask_or_zero(std::move(missing), values.size(), c.name_);
  c.codes_.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) c.codes_[i] = (!c.missing_[i] && values[i]) ? 1 : 0;
  return c;
}

Column Column::categorical(std::string name, std::span<const std::optional<std::string>> values) {
  Column c(std::move(name), ColumnKind::Categorical);
  std::unordered_map<std::string, std::int64_t> index;
  c.codes_.resize(values.size(), 0);
  c.missing_.resize(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) {
      c.missing_[i] = 1;
      continue;
    }
    auto [it, inserted] = index.try_emplace(*values[i], static_cast<std::int64_t>(c.levels_.size()));
    if (inserted) c.levels_.push_back(*values[i]);
    c.codes_[i] = it->second;
  }
  return c;
}

Column Column::categorical(std::string name, std::span<const std::string> values) {
  std::vector<std::optional<std::string>> opt(values.begin(), values.end());
  return categorical(std::move(name), opt);
}

Column Column::categorical_from_codes(std::string name, std::vector<std::string> levels,
                                      std::vector<std::int64_t> codes, std::vector<std::uint8_t> missing) {
  std::vector<std::optional<std::string>> values(codes.size());
  missing = mask_or_zero(std::move(missing), codes.size(), name);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (missing[i]) continue;
    if (codes[i] < 0 || static_cast<std::size_t>(codes[i]) >= levels.size())
      throw ValidationError("column '" + name + "': level code out of range");
    values[i] = levels[static_cast<std::size_t>(codes[i])];
  }
  // Re-densify so unused levels never linger in the level table.
  return categorical(std::move(name), values);
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), std::uint8_t{1}));
}

double Column::as_double(std::size_t row) const {
  if (missing_[row]) return missing_value();
  if (kind_ == ColumnKind::Numeric) return numbers_[row];
  return static_cast<double>(codes_[row]);
}

VectorXd Column::to_vector() const {
  VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v[static_cast<Eigen::Index>(i)] = as_double(i);
  return v;
}

std::string Column::render(std::size_t row) const {
  switch (kind_) {
    case ColumnKind::Numeric: return render_double(numbers_[row]);
    case ColumnKind::Timestamp: return format_timestamp(codes_[row]);
    case ColumnKind::Boolean: return codes_[row] ? "true" : "false";
    case ColumnKind::Categorical: return level(row);
  }
  return {};
}

Column Column::renamed(std::string name) const {
  Column c = *this;
  c.name_ = std::move(name);
  return c;
}

Column Column::gather(std::span<const std::optional<std::size_t>> rows) const {
  Column c(name_, kind_);
  c.missing_.resize(rows.size(), 1);
  if (kind_ == ColumnKind::Numeric)
    c.numbers_.assign(rows.size(), 0.0);
  else
    c.codes_.assign(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i] || missing_[*rows[i]]) continue;
    c.missing_[i] = 0;
    if (kind_ == ColumnKind::Numeric)
      c.numbers_[i] = numbers_[*rows[i]];
    else
      c.codes_[i] = codes_[*rows[i]];
  }
  if (kind_ == ColumnKind::Categorical) {
    return categorical_from_codes(name_, levels_, std::move(c.codes_), std::move(c.missing_));
  }
  return c;
}

Column Column::gather(std::span<const std::size_t> rows) const {
  std::vector<std::optional<std::size_t>> opt(rows.begin(), rows.end());
  return gather(opt);
}

bool operator==(const Column& a, const Column& b) {
  if (a.name_ != b.name_ || a.kind_ != b.kind_ || a.missing_ != b.missing_) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_missing(i)) continue;
    switch (a.kind_) {
      case ColumnKind::Numeric:
        if (a.numbers_[i] != b.numbers_[i]) return false;
        break;
      case ColumnKind::Categorical:
        if (a.level(i) != b.level(i)) return false;
        break;
      default:
        if (a.codes_[i] != b.codes_[i]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- Table

Table::Table(std::string name, std::vector<Column> columns)
    : Table(std::move(name), std::move(columns), columns.empty() ? 0 : columns.front().size()) {}

Table::Table(std::string name, std::vector<Column> columns, std::size_t row_count)
    : name_(std::move(name)), columns_(std::move(columns)), rows_(row_count) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.size() != rows_)
      throw ValidationError("column '" + c.name() + "' has " + std::to_string(c.size()) +
                            " rows, table has " + std::to_string(rows_));
    if (!seen.insert(c.name()).second) throw ValidationError("duplicate column name '" + c.name() + "'");
  }
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name());
  return names;
}

bool Table::has_column(std::string_view name) const { return find(name).has_value(); }

std::optional<std::size_t> Table::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name() == name) return i;
  return std::nullopt;
}

const Column& Table::column(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw ValidationError("unknown column '" + std::string(name) + "'");
  return columns_[*idx];
}

Table Table::with_column(Column column) const { return with_column_at(columns_.size(), std::move(column)); }

Table Table::with_column_at(std::size_t position, Column column) const {
  if (has_column(column.name())) throw ValidationError("column '" + column.name() + "' already exists");
  auto cols = columns_;
  cols.insert(cols.begin() + static_cast<std::ptrdiff_t>(std::min(position, cols.size())), std::move(column));
  return Table(name_, std::move(cols), rows_);
}

Table Table::without_columns(std::span<const std::string> names) const {
  std::vector<Column> cols;
  for (const auto& c : columns_)
    if (std::find(names.begin(), names.end(), c.name()) == names.end()) cols.push_back(c);
  return Table(name_, std::move(cols), rows_);
}

Table Table::select_columns(std::span<const std::string> names) const {
  std::vector<Column> cols;
  for (const auto& n : names) cols.push_back(column(n));
  return Table(name_, std::move(cols), rows_);
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) cols.push_back(c.gather(rows));
  return Table(name_, std::move(cols), rows.size());
}

Table Table::renamed(std::string name) const {
  Table t = *this;
  t.name_ = std::move(name);
  return t;
}

std::size_t Table::complete_case_count() const {
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows_; ++r) {
    bool complete = true;
    for (const auto& c : columns_) {
      if (c.is_missing(r)) {
        complete = false;
        break;
      }
    }
    count += complete ? 1 : 0;
  }
  return count;
}

std::vector<std::size_t> Table::complete_case_rows(std::span<const std::string> names) const {
  std::vector<const Column*> cols;
  for (const auto& n : names) cols.push_back(&column(n));
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < rows_; ++r) {
    if (std::none_of(cols.begin(), cols.end(), [r](const Column* c) { return c->is_missing(r); }))
      rows.push_back(r);
  }
  return rows;
}

bool operator==(const Table& a, const Table& b) {
  return a.rows_ == b.rows_ && a.columns_ == b.columns_;
}

// ---------------------------------------------------------------- stats

ColumnStats column_stats(const Column& column) {
  ColumnStats s;
  const std::size_t n = column.size();
  const std::size_t missing = column.missing_count();
  s.missing_fraction = n == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(n);

  if (column.kind() == ColumnKind::Numeric) {
    std::set<double> distinct;
    double sum = 0.0;
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (column.is_missing(i)) continue;
      const double v = column.number(i) == 0.0 ? 0.0 : column.number(i);
      distinct.insert(v);
      lo = count == 0 ? v : std::min(lo, v);
      hi = count == 0 ? v : std::max(hi, v);
      sum += v;
      ++count;
    }
    s.distinct_count = distinct.size();
    if (count > 0) {
      const double mean = sum / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!column.is_missing(i)) ss += (column.number(i) - mean) * (column.number(i) - mean);
      s.min = lo;
      s.max = hi;
      s.mean = mean;
      s.std_dev = std::sqrt(ss / static_cast<double>(count));
    }
  } else {
    std::set<std::int64_t> distinct;
    for (std::size_t i = 0; i < n; ++i)
      if (!column.is_missing(i)) distinct.insert(column.code(i));
    s.distinct_count = distinct.size();
  }
  // A column with no observed values has nothing to be constant about.
  s.is_constant = s.distinct_count == 1;
  return s;
}

ColumnStats column_stats(const Table& table, std::string_view column) {
  return column_stats(table.column(column));
}

// ---------------------------------------------------------------- time

TimeWindow::TimeWindow(Timestamp s, Timestamp e) : start(s), end(e) {
  if (!(start < end)) throw ValidationError("time window requires start < end");
}

WindowFilterResult filter_time_window(const Table& table, std::string_view time_column, const TimeWindow& window) {
  const Column& t = table.column(time_column);
  if (t.kind() != ColumnKind::Timestamp)
    throw ValidationError("column '" + t.name() + "' is " + std::string(to_string(t.kind())) + ", not timestamp");
  WindowFilterResult result;
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (t.is_missing(r))
      ++result.dropped_missing_time;
    else if (window.contains(t.timestamp_at(r)))
      keep.push_back(r);
    else
      ++result.dropped_outside;
  }
  result.table = table.select_rows(keep);
  return result;
}

Table make_composite_key(const Table& table, std::span<const std::string> columns, std::string key_name,
                         std::string_view separator) {
  if (columns.empty()) throw ValidationError("composite key needs at least one column");
  std::vector<const Column*> parts;
  for (const auto& c : columns) parts.push_back(&table.column(c));
  if (table.has_column(key_name)) throw ValidationError("column '" + key_name + "' already exists");

  std::vector<std::optional<std::string>> keys(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    std::string key;
    bool missing = false;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      if (parts[j]->is_missing(r)) {
        missing = true;
        break;
      }
      if (j > 0) key.append(separator);
      key += parts[j]->render(r);
    }
    if (!missing) keys[r] = std::move(key);
  }
  return table.with_column(Column::categorical(std::move(key_name), keys));
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[40];
  int n;
  if (hms.to_duration().count() == 0) {
    n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  } else {
    n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                      static_cast<long>(hms.seconds().count()));
  }
  return std::string(buf, static_cast<std::size_t>(n));
}

namespace {

bool read_fixed(std::string_view s, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d;
  if (s.size() < 10 || !read_fixed(s, 0, 4, y) || s[4] != '-' || !read_fixed(s, 5, 2, mo) || s[7] != '-' ||
      !read_fixed(s, 8, 2, d))
    return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  Timestamp secs = sys_seconds{sys_days{ymd}}.time_since_epoch().count();
  std::size_t pos = 10;
  if (pos == s.size()) return secs;

  if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
  ++pos;
  int h, mi, sec = 0;
  if (!read_fixed(s, pos, 2, h) || pos + 2 >= s.size() || s[pos + 2] != ':' || !read_fixed(s, pos + 3, 2, mi))
    return std::nullopt;
  pos += 5;
  if (pos < s.size() && s[pos] == ':') {
    if (!read_fixed(s, pos + 1, 2, sec)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      ++pos;
      const std::size_t digits = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == digits) return std::nullopt;
    }
  }
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
  secs += h * 3600 + mi * 60 + sec;

  if (pos == s.size()) return secs;
  if (s[pos] == 'Z' && pos + 1 == s.size()) return secs;
  if (s[pos] == '+' || s[pos] == '-') {
    int oh, om = 0;
    if (!read_fixed(s, pos + 1, 2, oh)) return std::nullopt;
    std::size_t next = pos + 3;
    if (next < s.size() && s[next] == ':') ++next;
    if (next < s.size()) {
      if (!read_fixed(s, next, 2, om) || next + 2 != s.size()) return std::nullopt;
    }
    const Timestamp offset = oh * 3600 + om * 60;
    return s[pos] == '+' ? secs - offset : secs + offset;
  }
  return std::nullopt;
}

}  // namespace mfg
