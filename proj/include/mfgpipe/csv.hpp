#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mfgpipe/table.hpp"

namespace mfg {

struct CsvReadOptions {
  std::map<std::string, ColumnKind, std::less<>> schema_hints;
  std::set<std::string, std::less<>> missing_tokens{"", "NA", "NaN", "NULL"};
};

struct CsvWriteOptions {
  std::string missing_token;  // written for missing cells
};

// RFC-4180 records: quoted fields may hold commas, doubled quotes and line breaks.
std::vector<std::vector<std::string>> parse_csv_records(std::istream& in);

// Kind inference per column: numeric, then timestamp (ISO-8601), then boolean
// (true/false), else categorical. Integer epoch seconds are read as timestamps
// only under a timestamp hint, since they already parse as numeric.
Table read_csv(std::istream& in, const CsvReadOptions& options = {}, std::string name = "table");
Table read_csv(const std::filesystem::path& path, const CsvReadOptions& options = {});

void write_csv(std::ostream& out, const Table& table, const CsvWriteOptions& options = {});
void write_csv(const std::filesystem::path& path, const Table& table, const CsvWriteOptions& options = {});

// One field, quoted only when it holds a comma, quote or line break.
std::string csv_field(std::string_view s);

std::set<std::string, std::less<>> parse_missing_tokens(const std::string& comma_list);

}  // namespace mfg
