#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sslab {

using Field = std::variant<double, std::int64_t, bool, std::string>;
// Insertion-ordered key/value list.
using FieldList = std::vector<std::pair<std::string, Field>>;

std::string field_to_string(const Field& f);

struct RunLog {
  FieldList header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> records;
  // Columns of the comma-separated table export (a subset of `columns`).
  std::vector<std::string> table_columns;
  FieldList summary;

  const Field* summary_field(const std::string& key) const;
  double summary_number(const std::string& key) const;
  std::vector<double> column(const std::string& name) const;
  bool operator==(const RunLog& o) const;
};

enum class ExportFormat { Records, Table };
ExportFormat export_format_from_string(const std::string& s);

// Line-delimited records: one header line, one line per record, then the
// summary line (omitted when the summary is empty).
void write_records(const RunLog& log, std::ostream& os);
// Records section only (the record lines), used for determinism checks.
std::string records_section(const RunLog& log);
RunLog read_records(std::istream& is);

// Comma-separated table with a header row, 17 significant digits.
void write_table(const RunLog& log, std::ostream& os, bool all_columns = false);
// Reads a table back into (columns, rows).
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_table(std::istream& is);

// Writes `<base>.jsonl` or `<base>.csv`; returns the path written.
std::string export_runlog(const RunLog& log, const std::string& base, ExportFormat fmt);
RunLog load_runlog(const std::string& path);

// Plain-text `key = value` file; '#' starts a comment.
std::map<std::string, double> read_constants(const std::string& path);
void write_constants(const std::string& path, const std::vector<std::pair<std::string, double>>& values,
                     const std::string& comment = "");

}  // namespace sslab
