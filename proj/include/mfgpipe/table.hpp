#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfgpipe/linalg.hpp"

namespace mfg {

enum class ColumnKind { Numeric, Categorical, Timestamp, Boolean };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

using Timestamp = std::int64_t;  // seconds since the Unix epoch

// One typed column. Numeric cells live in `numbers`; timestamps, categorical
// level codes and booleans (0/1) live in `codes`. A missing cell keeps a
// placeholder in its storage slot that must never be read.
class Column {
public:
  static Column numeric(std::string name, std::vector<double> values,
                        std::vector<std::uint8_t> missing = {});
  // NaN entries become missing.
  static Column numeric_from_nan(std::string name, std::span<const double> values);
  static Column timestamp(std::string name, std::vector<Timestamp> values,
                          std::vector<std::uint8_t> missing = {});
  static Column boolean(std::string name, std::vector<bool> values,
                        std::vector<std::uint8_t> missing = {});
  // Levels are numbered densely in order of first appearance.
  static Column categorical(std::string name, std::span<const std::optional<std::string>> values);
  static Column categorical(std::string name, std::span<const std::string> values);
  static Column categorical_from_codes(std::string name, std::vector<std::string> levels,
                                       std::vector<std::int64_t> codes,
                                       std::vector<std::uint8_t> missing);

  const std::string& name() const noexcept { return name_; }
  ColumnKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return missing_.size(); }

  bool is_missing(std::size_t row) const { return missing_[row] != 0; }
  std::size_t missing_count() const;
  std::span<const std::uint8_t> missing_mask() const noexcept { return missing_; }

  double number(std::size_t row) const { return numbers_[row]; }
  Timestamp timestamp_at(std::size_t row) const { return codes_[row]; }
  bool boolean_at(std::size_t row) const { return codes_[row] != 0; }
  std::int64_t code(std::size_t row) const { return codes_[row]; }
  const std::string& level(std::size_t row) const { return levels_[static_cast<std::size_t>(codes_[row])]; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }

  // Numeric view: Numeric as is, Boolean as 0/1, Timestamp as seconds,
  // Categorical as level code. Missing cells are NaN.
  double as_double(std::size_t row) const;
  VectorXd to_vector() const;

  // Canonical text of a non-missing cell; the CSV writer and composite keys use it.
  std::string render(std::size_t row) const;

  Column renamed(std::string name) const;
  // Rows picked by index; std::nullopt yields a missing cell.
  Column gather(std::span<const std::optional<std::size_t>> rows) const;
  Column gather(std::span<const std::size_t> rows) const;

  friend bool operator==(const Column& a, const Column& b);

private:
  Column(std::string name, ColumnKind kind) : name_(std::move(name)), kind_(kind) {}

  std::string name_;
  ColumnKind kind_;
  std::vector<double> numbers_;
  std::vector<std::int64_t> codes_;
  std::vector<std::string> levels_;
  std::vector<std::uint8_t> missing_;
};

// Immutable ordered set of equal-length, uniquely named columns.
class Table {
public:
  Table() = default;
  Table(std::string name, std::vector<Column> columns);
  // Explicit row count, needed when there are no columns.
  Table(std::string name, std::vector<Column> columns, std::size_t row_count);

  const std::string& name() const noexcept { return name_; }
  std::size_t row_count() const noexcept { return rows_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  // Throws ValidationError for an unknown name.
  const Column& column(std::string_view name) const;
  const Column& column(std::size_t index) const { return columns_[index]; }

  Table with_column(Column column) const;
  Table with_column_at(std::size_t position, Column column) const;
  Table without_columns(std::span<const std::string> names) const;
  Table select_columns(std::span<const std::string> names) const;
  Table select_rows(std::span<const std::size_t> rows) const;
  Table renamed(std::string name) const;

  // Rows with no missing cell in any column.
  std::size_t complete_case_count() const;
  std::vector<std::size_t> complete_case_rows(std::span<const std::string> names) const;

  friend bool operator==(const Table& a, const Table& b);

private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

struct ColumnStats {
  double missing_fraction = 0.0;
  std::size_t distinct_count = 0;
  bool is_constant = false;
  // Populated for Numeric columns with at least one non-missing cell.
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> mean;
  std::optional<double> std_dev;  // population (n divisor)
};

ColumnStats column_stats(const Column& column);
ColumnStats column_stats(const Table& table, std::string_view column);

struct TimeWindow {
  Timestamp start;  // inclusive
  Timestamp end;    // exclusive

  TimeWindow(Timestamp start, Timestamp end);
  bool contains(Timestamp t) const noexcept { return start <= t && t < end; }
};

struct WindowFilterResult {
  Table table;
  std::size_t dropped_missing_time = 0;
  std::size_t dropped_outside = 0;
};

WindowFilterResult filter_time_window(const Table& table, std::string_view time_column,
                                      const TimeWindow& window);

Table make_composite_key(const Table& table, std::span<const std::string> columns,
                         std::string key_name, std::string_view separator = "_");

// Timestamp text: "YYYY-MM-DD" when the time of day is midnight, otherwise
// "YYYY-MM-DDTHH:MM:SS". Parsing accepts those plus a space separator,
// fractional seconds (truncated), and a trailing Z or +HH:MM offset.
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_iso8601(std::string_view text);

}  // namespace mfg
