#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vaxledger/error.hpp"
#include "vaxledger/simulation.hpp"

namespace vaxledger {

inline constexpr std::string_view kCsvHeader =
    "step,tps,response_time_ms,peer_bandwidth_kb,ordering_bandwidth_kb,errors,saturated";

namespace detail {
inline std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}
}  // namespace detail

/// One row per level, numbers at one decimal.
inline std::string render_csv(const std::vector<MetricsReport>& reports) {
  bool any = false;
  for (const auto& r : reports) any = any || !r.levels.empty();
  require(any, Errc::invalid_argument, "cannot export an empty report");
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : reports) {
    for (const auto& l : r.levels) {
      out += std::string(to_string(l.step)) + "," + detail::fixed1(l.tps) + "," + detail::fixed1(l.mean_ms) + "," +
             detail::fixed1(l.peer_bandwidth_kb) + "," + detail::fixed1(l.ordering_bandwidth_kb) + "," +
             std::to_string(l.error_count()) + "," + (l.saturated ? "true" : "false") + "\n";
    }
  }
  return out;
}

inline std::string render_csv(const MetricsReport& report) { return render_csv(std::vector<MetricsReport>{report}); }

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io_error, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  require(static_cast<bool>(out), Errc::io_error, "write to '" + path.string() + "' failed");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void export_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& path) {
  write_text_file(path, render_csv(reports));
}

inline void export_csv(const MetricsReport& report, const std::filesystem::path& path) {
  export_csv(std::vector<MetricsReport>{report}, path);
}

// ---------------------------------------------------------------------------
// Plain CSV tables
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    fail(Errc::config_error, "missing CSV column '" + std::string(name) + "'");
  }
};

/// Comma-separated, no quoting; blank lines are skipped.
inline CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      require(cells.size() == t.header.size(), Errc::config_error,
              "CSV row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  require(!t.header.empty(), Errc::config_error, "CSV is empty");
  return t;
}

/// Aligned text table: text columns left-aligned, numeric ones right-aligned.
inline std::string render_table(const CsvTable& t) {
  std::vector<std::size_t> width(t.header.size());
  std::vector<bool> numeric(t.header.size(), true);
  for (std::size_t c = 0; c < t.header.size(); ++c) width[c] = t.header[c].size();
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      width[c] = std::max(width[c], r[c].size());
      char* end = nullptr;
      std::strtod(r[c].c_str(), &end);
      if (r[c].empty() || *end != '\0') numeric[c] = false;
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::string pad(width[c] - cells[c].size(), ' ');
      out += c ? "  " : "";
      out += numeric[c] ? pad + cells[c] : cells[c] + pad;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(t.header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : t.rows) out += line(r);
  return out;
}

}  // namespace vaxledger
