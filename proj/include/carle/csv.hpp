#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "carle/error.hpp"
#include "carle/signal.hpp"

namespace carle::csv {

/// Numeric table with an optional header. Lines starting with '#' are
/// comments; the first `# key=value` comments are kept as metadata.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;

  std::size_t columns() const { return header.empty() ? (rows.empty() ? 0 : rows.front().size()) : header.size(); }

  std::ptrdiff_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

inline Table parse(std::istream& in, const std::string& source = "<stream>") {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      table.comments.emplace_back(detail::trim(view.substr(1)));
      continue;
    }
    const auto fields = detail::split(view);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && detail::parse_double(fields[i], row[i]);
    if (!numeric) {
      if (!first_data_line)
        throw InputError(source + ":" + std::to_string(line_no) + ": non-numeric value in data row");
      for (auto f : fields) table.header.emplace_back(f);
      first_data_line = false;
      continue;
    }
    first_data_line = false;
    const std::size_t expected = table.header.empty() ? (table.rows.empty() ? row.size() : table.rows.front().size())
                                                      : table.header.size();
    if (row.size() != expected)
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                       " columns, found " + std::to_string(row.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse(in, path);
}

inline void write(std::ostream& out, const Table& table) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : table.comments) out << "# " << c << '\n';
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  if (!table.header.empty()) out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void write(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write(out, table);
}

/// Looks up `key` in `# key=value` comment lines.
inline std::string metadata(const Table& table, std::string_view key) {
  for (const auto& c : table.comments) {
    const auto eq = c.find('=');
    if (eq != std::string::npos && detail::trim(std::string_view(c).substr(0, eq)) == key)
      return std::string(detail::trim(std::string_view(c).substr(eq + 1)));
  }
  return {};
}

/// Raw-signal table: `t,ch1,ch2,...` with a header, or headerless channel columns.
inline MultiChannelSignal to_signal(const Table& table, double sample_rate_hz) {
  if (table.rows.empty()) throw InputError("signal CSV has no samples");
  std::size_t first = 0;
  if (!table.header.empty() && (table.header.front() == "t" || table.header.front() == "time")) first = 1;
  const std::size_t width = table.rows.front().size();
  if (width <= first) throw InputError("signal CSV has no channel columns");
  std::vector<std::vector<double>> channels(width - first, std::vector<double>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = first; c < width; ++c) channels[c - first][r] = table.rows[r][c];
  return {std::move(channels), sample_rate_hz};
}

inline Table from_signal(const MultiChannelSignal& signal) {
  Table table;
  table.header.emplace_back("t");
  for (std::size_t c = 0; c < signal.channel_count(); ++c) table.header.push_back("ch" + std::to_string(c + 1));
  table.rows.resize(signal.length());
  for (std::size_t i = 0; i < signal.length(); ++i) {
    auto& row = table.rows[i];
    row.reserve(signal.channel_count() + 1);
    row.push_back(static_cast<double>(i) / signal.sample_rate_hz());
    for (std::size_t c = 0; c < signal.channel_count(); ++c) row.push_back(signal.channel(c)[i]);
  }
  return table;
}

}  // namespace carle::csv
