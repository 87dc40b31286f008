#pragma once

// Trajectory CSV: header `t,acc,dacc,pi_1,...,pi_K`, one row per sample,
// reals at 17 significant digits, `\n` line endings.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rlvr/digest.hpp"
#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/runner/files.hpp"

namespace rlvr::runner {

inline std::vector<std::string> csv_columns(std::size_t k) {
  std::vector<std::string> cols{"t", "acc", "dacc"};
  for (std::size_t i = 1; i <= k; ++i) cols.push_back("pi_" + std::to_string(i));
  return cols;
}

inline std::string format_csv(const Trajectory& traj) {
  std::string out;
  const auto cols = csv_columns(traj.pattern_count);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += cols[c];
  }
  for (const auto& s : traj.samples) {
    require(s.probs.size() == traj.pattern_count, ErrorCode::invalid_input, "sample width does not match trajectory");
    out += '\n';
    out += format_double(s.t);
    out += ',';
    out += format_double(s.acc);
    out += ',';
    out += format_double(s.dacc);
    for (double p : s.probs) {
      out += ',';
      out += format_double(p);
    }
  }
  out += '\n';
  return out;
}

inline void emit_csv(const Trajectory& traj, const std::filesystem::path& path) {
  write_file_atomic(path, format_csv(traj));
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline double parse_real(std::string_view cell, std::size_t line_no) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end)
    fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": cannot parse '" + std::string(cell) + "'");
  return v;
}

}  // namespace detail

/// Inverse of format_csv. Mode and digest are not stored in the file and
/// are left at their defaults.
inline Trajectory parse_csv(std::string_view text) {
  std::vector<std::string_view> lines = detail::split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  require(!lines.empty(), ErrorCode::parse, "CSV has no header");

  const auto header = detail::split(lines[0], ',');
  require(header.size() >= 5, ErrorCode::parse, "CSV header needs t,acc,dacc and at least two pi columns");
  const auto expected = csv_columns(header.size() - 3);
  for (std::size_t c = 0; c < header.size(); ++c)
    require(header[c] == expected[c], ErrorCode::parse,
            "unexpected CSV column '" + std::string(header[c]) + "', wanted '" + expected[c] + "'");

  Trajectory traj;
  traj.pattern_count = header.size() - 3;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = detail::split(lines[n], ',');
    require(cells.size() == header.size(), ErrorCode::parse,
            "line " + std::to_string(n + 1) + " has " + std::to_string(cells.size()) + " cells");
    Sample s;
    s.t = detail::parse_real(cells[0], n + 1);
    s.acc = detail::parse_real(cells[1], n + 1);
    s.dacc = detail::parse_real(cells[2], n + 1);
    for (std::size_t c = 3; c < cells.size(); ++c) s.probs.push_back(detail::parse_real(cells[c], n + 1));
    traj.samples.push_back(std::move(s));
  }
  if (!traj.samples.empty()) traj.end_time = traj.samples.back().t;
  return traj;
}

inline Trajectory load_csv_file(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

}  // namespace rlvr::runner
