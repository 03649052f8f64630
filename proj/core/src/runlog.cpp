#include "sslab/runlog.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "sslab/wspace.hpp"

namespace sslab {

namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// JSON has no NaN/Inf, so those travel as strings.
json number_to_json(double x) {
  if (std::isfinite(x)) return json(x);
  return json(fmt17(x));
}

bool nonfinite_token(const std::string& s, double& out) {
  if (s == "nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s == "inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (s == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  return false;
}

json field_to_json(const Field& f) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
          return number_to_json(v);
        else
          return json(v);
      },
      f);
}

Field json_to_field(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    double x;
    if (nonfinite_token(s, x)) return x;
    return s;
  }
  throw ValidationError("runlog: unsupported field value " + j.dump());
}

double json_to_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  double x;
  if (j.is_string() && nonfinite_token(j.get<std::string>(), x)) return x;
  throw ValidationError("runlog: record value is not a number: " + j.dump());
}

json fields_object(const char* type, const FieldList& fields) {
  json o;
  o["type"] = type;
  for (const auto& [k, v] : fields) o[k] = field_to_json(v);
  return o;
}

json record_object(const RunLog& log, std::size_t i) {
  json o;
  o["type"] = "record";
  for (std::size_t c = 0; c < log.columns.size(); ++c) o[log.columns[c]] = number_to_json(log.records[i][c]);
  return o;
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_fields(const FieldList& a, const FieldList& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || a[i].second.index() != b[i].second.index()) return false;
    if (const double* x = std::get_if<double>(&a[i].second)) {
      if (!same_double(*x, std::get<double>(b[i].second))) return false;
    } else if (a[i].second != b[i].second) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string field_to_string(const Field& f) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
          return fmt17(v);
        else if constexpr (std::is_same_v<T, bool>)
          return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>)
          return std::to_string(v);
        else
          return v;
      },
      f);
}

const Field* RunLog::summary_field(const std::string& key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return &v;
  return nullptr;
}

double RunLog::summary_number(const std::string& key) const {
  const Field* f = summary_field(key);
  if (!f) throw ValidationError("runlog: no summary field " + key);
  if (const double* x = std::get_if<double>(f)) return *x;
  if (const auto* i = std::get_if<std::int64_t>(f)) return double(*i);
  if (const bool* b = std::get_if<bool>(f)) return *b ? 1.0 : 0.0;
  throw ValidationError("runlog: summary field " + key + " is not numeric");
}

std::vector<double> RunLog::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] != name) continue;
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r[c]);
    return out;
  }
  throw ValidationError("runlog: no column " + name);
}

bool RunLog::operator==(const RunLog& o) const {
  if (columns != o.columns || table_columns != o.table_columns || records.size() != o.records.size()) return false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].size() != o.records[i].size()) return false;
    for (std::size_t c = 0; c < records[i].size(); ++c)
      if (!same_double(records[i][c], o.records[i][c])) return false;
  }
  return same_fields(header, o.header) && same_fields(summary, o.summary);
}

ExportFormat export_format_from_string(const std::string& s) {
  if (s == "records") return ExportFormat::Records;
  if (s == "table") return ExportFormat::Table;
  throw ValidationError("unknown export format '" + s + "' (expected records or table)");
}

void write_records(const RunLog& log, std::ostream& os) {
  json h = fields_object("header", log.header);
  h["columns"] = log.columns;
  h["table_columns"] = log.table_columns;
  os << h.dump() << '\n';
  os << records_section(log);
  if (!log.summary.empty()) os << fields_object("summary", log.summary).dump() << '\n';
}

std::string records_section(const RunLog& log) {
  std::string out;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (log.records[i].size() != log.columns.size()) throw ValidationError("runlog: record width mismatch");
    out += record_object(log, i).dump();
    out += '\n';
  }
  return out;
}

RunLog read_records(std::istream& is) {
  RunLog log;
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("runlog line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      have_header = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "type") continue;
        if (it.key() == "columns")
          log.columns = it.value().get<std::vector<std::string>>();
        else if (it.key() == "table_columns")
          log.table_columns = it.value().get<std::vector<std::string>>();
        else
          log.header.emplace_back(it.key(), json_to_field(it.value()));
      }
    } else if (type == "record") {
      if (!have_header) throw ValidationError("runlog: record before header");
      std::vector<double> row(log.columns.size());
      for (std::size_t c = 0; c < log.columns.size(); ++c) {
        if (!j.contains(log.columns[c])) throw ValidationError("runlog: record missing " + log.columns[c]);
        row[c] = json_to_double(j[log.columns[c]]);
      }
      log.records.push_back(std::move(row));
    } else if (type == "summary") {
      for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "type") log.summary.emplace_back(it.key(), json_to_field(it.value()));
    } else {
      throw ValidationError("runlog line " + std::to_string(lineno) + ": unknown type '" + type + "'");
    }
  }
  if (!have_header) throw ValidationError("runlog: missing header line");
  return log;
}

void write_table(const RunLog& log, std::ostream& os, bool all_columns) {
  const std::vector<std::string>& cols =
      all_columns || log.table_columns.empty() ? log.columns : log.table_columns;
  std::vector<std::size_t> idx;
  for (const auto& name : cols) {
    std::size_t c = 0;
    while (c < log.columns.size() && log.columns[c] != name) ++c;
    if (c == log.columns.size()) throw ValidationError("runlog: table column " + name + " not in records");
    idx.push_back(c);
  }
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& r : log.records) {
    for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << fmt17(r[idx[k]]);
    os << '\n';
  }
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_table(std::istream& is) {
  std::pair<std::vector<std::string>, std::vector<std::vector<double>>> out;
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("table: empty input");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.first.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      double x;
      if (!nonfinite_token(cell, x)) x = std::stod(cell);
      row.push_back(x);
    }
    if (row.size() != out.first.size()) throw ValidationError("table: row width mismatch");
    out.second.push_back(std::move(row));
  }
  return out;
}

std::string export_runlog(const RunLog& log, const std::string& base, ExportFormat fmt) {
  const std::string path = base + (fmt == ExportFormat::Records ? ".jsonl" : ".csv");
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path);
  if (fmt == ExportFormat::Records)
    write_records(log, os);
  else
    write_table(log, os);
  return path;
}

RunLog load_runlog(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open run log " + path);
  return read_records(is);
}

std::map<std::string, double> read_constants(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open constants file " + path);
  std::map<std::string, double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      out[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": not a number: " + val);
    }
  }
  return out;
}

void write_constants(const std::string& path, const std::vector<std::pair<std::string, double>>& values,
                     const std::string& comment) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path);
  if (!comment.empty()) {
    std::stringstream ss(comment);
    std::string line;
    while (std::getline(ss, line)) os << "# " << line << '\n';
  }
  for (const auto& [k, v] : values) os << k << " = " << fmt17(v) << '\n';
}

}  // namespace sslab
