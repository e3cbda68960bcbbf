#pragma once

// Time-series CSV: header row, one row per recorded sample with 17
// significant digits, then '#' comment lines carrying the verdict and the
// resolved configuration.

#include <array>
#include <charconv>
#include <cstddef>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mghc/engine.hpp"
#include "mghc/errors.hpp"

namespace mghc {

struct Timeseries {
  std::vector<std::string> names;  ///< channel columns after `t`
  std::vector<double> time;
  std::vector<std::vector<double>> columns;
  std::vector<std::string> footer;

  const std::vector<double>& column(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return columns[i];
    }
    throw InvalidArgument("no column " + std::string(name));
  }
  bool has(std::string_view name) const {
    for (const auto& n : names) {
      if (n == name) return true;
    }
    return false;
  }
};

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                               std::chars_format::general, 17);
  return std::string(buf.data(), p);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

/// The exported channels of a run: everything except the diagnostic ones.
inline Timeseries to_timeseries(const SimResult& res) {
  Timeseries ts;
  ts.time = res.time;
  for (std::size_t i = 0; i < res.names.size(); ++i) {
    const auto& n = res.names[i];
    if (n == channel::kLoadP || n == channel::kLossP || n == channel::kPllHz) continue;
    ts.names.push_back(n);
    ts.columns.push_back(res.data[i]);
  }
  return ts;
}

inline std::string render_csv(const Timeseries& ts) {
  std::string out = "t";
  for (const auto& n : ts.names) out += "," + n;
  out += '\n';
  for (std::size_t r = 0; r < ts.time.size(); ++r) {
    out += format_double(ts.time[r]);
    for (const auto& col : ts.columns) {
      out += ',';
      out += format_double(col[r]);
    }
    out += '\n';
  }
  for (const auto& f : ts.footer) out += "# " + f + '\n';
  return out;
}

inline Timeseries parse_csv(std::istream& in) {
  Timeseries ts;
  std::string line;
  int lineno = 0;
  int row = 0;
  bool have_header = false;
  std::vector<std::string_view> cells;
  auto split = [&cells](std::string_view s) {
    cells.clear();
    std::size_t start = 0;
    for (;;) {
      const auto pos = s.find(',', start);
      cells.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      ts.footer.push_back(line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    split(line);
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "t") {
        throw ParseError("header must start with 't' and name at least one channel", lineno);
      }
      for (std::size_t i = 1; i < cells.size(); ++i) ts.names.emplace_back(cells[i]);
      ts.columns.assign(ts.names.size(), {});
      have_header = true;
      continue;
    }
    ++row;
    if (cells.size() != ts.names.size() + 1) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(ts.names.size() + 1) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      if (!parse_double(cells[i], v)) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric value '" +
                             std::string(cells[i]) + "' in column '" +
                             (i == 0 ? std::string("t") : ts.names[i - 1]) + "'",
                         lineno);
      }
      if (i == 0) {
        ts.time.push_back(v);
      } else {
        ts.columns[i - 1].push_back(v);
      }
    }
  }
  if (!have_header) throw ParseError("empty CSV", 0);
  return ts;
}

inline Timeseries parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

}  // namespace mghc
