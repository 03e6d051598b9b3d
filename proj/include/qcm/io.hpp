// CSV emission and parsing for time series; writes are atomic (temp + rename).
#pragma once

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qcm/errors.hpp"
#include "qcm/timeseries.hpp"

namespace qcm {

// 17 significant digits: enough to round-trip any double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out.flush()) throw config_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw config_error("rename to '" + path + "' failed: " + ec.message());
}

}  // namespace detail

// Header row then one row per sample, comma separated, LF line endings.
inline void write_csv(const std::string& path, const TimeSeries& ts) {
  std::ostringstream out;
  out << "t";
  for (const auto& n : ts.names) out << ',' << n;
  out << '\n';
  for (int i = 0; i < ts.samples(); ++i) {
    out << format_double(ts.grid.t(i));
    for (int c = 0; c < ts.channels(); ++c) out << ',' << format_double(ts.at(c, i));
    out << '\n';
  }
  detail::atomic_write(path, out.str());
}

// Degenerate output for an empty run: header only, no sample rows.
inline void write_csv_header_only(const std::string& path, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "t";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  detail::atomic_write(path, out.str());
}

struct CsvTable {
  std::vector<std::string> names;              // includes the leading "t"
  std::vector<std::vector<double>> columns;    // one vector per name
  int rows() const { return columns.empty() ? 0 : static_cast<int>(columns[0].size()); }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw config_error("'" + path + "': missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.names.push_back(cell);
  if (table.names.empty() || table.names[0] != "t")
    throw config_error("'" + path + "': first column must be t");
  table.columns.assign(table.names.size(), {});
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col >= table.names.size())
        throw config_error("'" + path + "': too many cells in row " + std::to_string(row));
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0' || errno == ERANGE)
        throw config_error("'" + path + "': bad number '" + cell + "' in row " + std::to_string(row));
      table.columns[col].push_back(v);
      ++col;
    }
    if (col != table.names.size())
      throw config_error("'" + path + "': short row " + std::to_string(row));
    ++row;
  }
  return table;
}

// Rebuild a TimeSeries from a parsed table (validates grid uniformity).
inline TimeSeries series_from_table(const CsvTable& table) {
  const int rows = table.rows();
  if (rows < 1) throw config_error("csv table: no sample rows");
  const auto& t = table.columns[0];
  if (std::abs(t[0]) > 1e-12) throw config_error("csv table: grid must start at t=0");
  const double h = rows > 1 ? t[1] - t[0] : 1.0;
  for (int i = 1; i < rows; ++i)
    if (std::abs(t[i] - i * h) > 1e-9 * std::max(1.0, std::abs(t[rows - 1])))
      throw config_error("csv table: grid not uniform");
  TimeSeries ts(TimeGrid{h, rows - 1});
  for (size_t c = 1; c < table.names.size(); ++c) {
    const int ch = ts.add_channel(table.names[c]);
    ts.cols[ch] = table.columns[c];
  }
  return ts;
}

}  // namespace qcm
