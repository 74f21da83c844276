#pragma once

/// \file table.hpp
/// Result tables and their CSV / JSON emission.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dmdt/cli/config.hpp"

namespace dmdt::cli {

using Cell = std::variant<std::int64_t, double, std::string, bool>;

struct Provenance {
  std::string version{kVersion};
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string config_echo;  // one-line JSON; config_hash = fnv1a(config_echo)
  std::vector<std::string> notes;
};

class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  [[nodiscard]] const std::vector<std::string>& columns() const { return columns_; }
  [[nodiscard]] const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  Provenance& provenance() { return provenance_; }
  [[nodiscard]] const Provenance& provenance() const { return provenance_; }

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns_.size()) {
      throw std::logic_error("ResultTable: row has " + std::to_string(row.size()) +
                             " cells, table has " + std::to_string(columns_.size()) + " columns");
    }
    rows_.push_back(std::move(row));
  }

  /// Index of a column, or throws.
  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i] == name) return i;
    }
    throw std::out_of_range("ResultTable: no column " + name);
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
  Provenance provenance_;
};

inline ResultTable with_provenance(ResultTable t, const RunConfig& cfg) {
  auto& p = t.provenance();
  p.config_echo = provenance_echo(cfg);
  p.config_hash = config_hash(cfg);
  p.seed = cfg.seed;
  return t;
}

namespace detail {

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string render_cell(const Cell& c) {
  struct Visitor {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_real(v); }
    std::string operator()(const std::string& v) const { return csv_field(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
  };
  return std::visit(Visitor{}, c);
}

inline nlohmann::ordered_json json_cell(const Cell& c) {
  struct Visitor {
    nlohmann::ordered_json operator()(std::int64_t v) const { return v; }
    nlohmann::ordered_json operator()(double v) const {
      if (!std::isfinite(v)) return nullptr;
      // Same 9 significant digits as the CSV.
      return std::strtod(format_real(v).c_str(), nullptr);
    }
    nlohmann::ordered_json operator()(const std::string& v) const { return v; }
    nlohmann::ordered_json operator()(bool v) const { return v; }
  };
  return std::visit(Visitor{}, c);
}

}  // namespace detail

/// Provenance as '#' comment lines, header row, then rows. '\n' endings.
inline std::string to_csv(const ResultTable& t) {
  std::string s;
  const auto& p = t.provenance();
  s += "# tool dmdt " + p.version + "\n";
  s += "# config_hash fnv1a64:" + p.config_hash + "\n";
  s += "# seed " + std::to_string(p.seed) + "\n";
  s += "# config " + p.config_echo + "\n";
  for (const auto& n : p.notes) s += "# note " + n + "\n";
  for (std::size_t i = 0; i < t.columns().size(); ++i) {
    if (i) s += ",";
    s += detail::csv_field(t.columns()[i]);
  }
  s += "\n";
  for (const auto& row : t.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += ",";
      s += detail::render_cell(row[i]);
    }
    s += "\n";
  }
  return s;
}

/// {"meta": {...}, "rows": [{column: value, ...}, ...]}
inline std::string to_json_text(const ResultTable& t) {
  nlohmann::ordered_json doc;
  const auto& p = t.provenance();
  nlohmann::ordered_json meta;
  meta["tool"] = "dmdt";
  meta["version"] = p.version;
  meta["config_hash"] = "fnv1a64:" + p.config_hash;
  meta["seed"] = p.seed;
  meta["config"] = nlohmann::ordered_json::parse(p.config_echo.empty() ? "{}" : p.config_echo);
  meta["columns"] = t.columns();
  meta["notes"] = p.notes;
  doc["meta"] = meta;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows()) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[t.columns()[i]] = detail::json_cell(row[i]);
    rows.push_back(std::move(r));
  }
  doc["rows"] = rows;
  return doc.dump(2) + "\n";
}

inline std::string render(const ResultTable& t, const std::string& format) {
  if (format == "csv") return to_csv(t);
  if (format == "json") return to_json_text(t);
  throw std::invalid_argument("unknown output format \"" + format + "\"");
}

/// Writes to `path`, or returns the text when path is empty.
inline std::string emit(const ResultTable& t, const std::string& format, const std::string& path) {
  const std::string text = render(t, format);
  if (path.empty()) return text;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing output file " + path);
  return {};
}

}  // namespace dmdt::cli
