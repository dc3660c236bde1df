#pragma once

// Tabular report emission (CSV and a JSON mirror).
//
// CSV layout:
//   # config: {compact JSON of the effective run configuration}
//   col_a,col_b,...
//   row values...
// Doubles print in shortest round-trip form; NaN prints as "nan".

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ddepth/evaluate.hpp"

namespace ddepth {

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("table row width mismatch");
    rows.push_back(std::move(row));
  }
};

enum class ReportFormat { Csv, Json };

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return {buf, res.ptr};
}

inline std::string format_cell(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::to_string(std::get<std::int64_t>(c));
}

inline std::string to_csv(const Table& t, const nlohmann::json& config) {
  std::ostringstream os;
  os << "# config: " << config.dump() << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const Table& t, const nlohmann::json& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& key = t.columns[i];
      if (const auto* s = std::get_if<std::string>(&row[i])) r[key] = *s;
      else if (const auto* d = std::get_if<double>(&row[i])) r[key] = std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json();
      else r[key] = std::get<std::int64_t>(row[i]);
    }
    rows.push_back(std::move(r));
  }
  return {{"config", config}, {"columns", t.columns}, {"rows", std::move(rows)}};
}

inline void write_table(const Table& t, const nlohmann::json& config, const std::string& path,
                        ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open report file '" + path + "' for writing");
  if (format == ReportFormat::Csv) out << to_csv(t, config);
  else out << to_json(t, config).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing report file '" + path + "'");
}

inline const std::vector<std::string>& eval_report_columns() {
  static const std::vector<std::string> cols = {
      "subset", "mode", "n_objects", "n_scored", "mae_combined", "mae_oracle", "rejection_rate",
      "mean_iterations", "mean_combined_variance", "collapse_recovery_rate", "note"};
  return cols;
}

inline Table to_table(const EvalReport& report) {
  Table t{eval_report_columns(), {}};
  for (const auto& r : report.rows)
    t.add({r.subset, to_string(r.mode), static_cast<std::int64_t>(r.n_objects),
           static_cast<std::int64_t>(r.n_scored), r.mae_combined, r.mae_oracle, r.rejection_rate,
           r.mean_iterations, r.mean_combined_variance, r.collapse_recovery_rate, r.note});
  return t;
}

/// Writes an evaluation report; one row per (subset, mode) in report order.
inline void emit_report(const EvalReport& report, const nlohmann::json& config,
                        const std::string& path, ReportFormat format = ReportFormat::Csv) {
  write_table(to_table(report), config, path, format);
}

}  // namespace ddepth
