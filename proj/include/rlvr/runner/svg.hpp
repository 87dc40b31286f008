#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "rlvr/error.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/runner/csv.hpp"
#include "rlvr/runner/files.hpp"

namespace rlvr::runner {

struct SvgOptions {
  int width = 800;
  int height = 480;
  std::string title;
  std::string x_label = "flow time t";
  std::string y_label = "value";
};

namespace detail {

inline double column_value(const Sample& s, std::size_t column) {
  switch (column) {
    case 0: return s.t;
    case 1: return s.acc;
    case 2: return s.dacc;
    default: return s.probs[column - 3];
  }
}

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Widens a zero-width extent so the axis mapping stays finite.
inline void widen(double& lo, double& hi) {
  if (hi > lo) return;
  const double pad = lo == 0.0 ? 0.5 : 0.5 * std::abs(lo);
  lo -= pad;
  hi += pad;
}

}  // namespace detail

inline std::string render_svg(const Trajectory& traj, const std::vector<std::string>& series,
                              const SvgOptions& opt = {}) {
  const auto cols = csv_columns(traj.pattern_count);
  require(!series.empty(), ErrorCode::invalid_input, "no series selected for the plot");
  std::vector<std::size_t> idx;
  for (const auto& name : series) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    require(it != cols.end() && it != cols.begin(), ErrorCode::invalid_input, "unknown series '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - cols.begin()));
  }

  double x0 = 0.0, x1 = 0.0;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  if (!traj.samples.empty()) {
    x0 = traj.samples.front().t;
    x1 = traj.samples.back().t;
    for (const auto& s : traj.samples)
      for (auto c : idx) {
        y0 = std::min(y0, detail::column_value(s, c));
        y1 = std::max(y1, detail::column_value(s, c));
      }
  } else {
    y0 = y1 = 0.0;
  }
  detail::widen(x0, x1);
  detail::widen(y0, y1);

  const double left = 70, right = 150, top = 40, bottom = 55;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  static constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                       "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const auto W = std::to_string(opt.width), H = std::to_string(opt.height);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + W + "\" height=\"" + H + "\" viewBox=\"0 0 " + W +
         " " + H + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    out += "<text x=\"" + detail::fixed(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           detail::escape_xml(opt.title) + "</text>\n";

  // axes
  out += "<g stroke=\"black\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + detail::fixed(left) + "\" y1=\"" + detail::fixed(top + ph) + "\" x2=\"" +
         detail::fixed(left + pw) + "\" y2=\"" + detail::fixed(top + ph) + "\"/>\n";
  out += "<line x1=\"" + detail::fixed(left) + "\" y1=\"" + detail::fixed(top) + "\" x2=\"" + detail::fixed(left) +
         "\" y2=\"" + detail::fixed(top + ph) + "\"/>\n";
  out += "</g>\n";
  constexpr int ticks = 5;
  for (int i = 0; i < ticks; ++i) {
    const double fx = x0 + (x1 - x0) * i / (ticks - 1);
    const double fy = y0 + (y1 - y0) * i / (ticks - 1);
    out += "<text x=\"" + detail::fixed(sx(fx)) + "\" y=\"" + detail::fixed(top + ph + 16) +
           "\" text-anchor=\"middle\">" + detail::tick(fx) + "</text>\n";
    out += "<text x=\"" + detail::fixed(left - 6) + "\" y=\"" + detail::fixed(sy(fy) + 4) +
           "\" text-anchor=\"end\">" + detail::tick(fy) + "</text>\n";
  }
  out += "<text x=\"" + detail::fixed(left + pw / 2) + "\" y=\"" + detail::fixed(opt.height - 12.0) +
         "\" text-anchor=\"middle\">" + detail::escape_xml(opt.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::fixed(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::fixed(top + ph / 2) + ")\">" + detail::escape_xml(opt.y_label) + "</text>\n";

  for (std::size_t k = 0; k < idx.size(); ++k) {
    const char* color = palette[k % palette.size()];
    out += "<polyline class=\"series\" data-series=\"" + series[k] + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t n = 0; n < traj.samples.size(); ++n) {
      const auto& s = traj.samples[n];
      if (n) out += ' ';
      out += detail::fixed(sx(s.t)) + "," + detail::fixed(sy(detail::column_value(s, idx[k])));
    }
    out += "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + detail::fixed(left + pw + 15) + "\" y1=\"" + detail::fixed(ly) + "\" x2=\"" +
           detail::fixed(left + pw + 40) + "\" y2=\"" + detail::fixed(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::fixed(left + pw + 46) + "\" y=\"" + detail::fixed(ly + 4) + "\">" + series[k] +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void emit_svg(const Trajectory& traj, const std::vector<std::string>& series, const std::filesystem::path& path,
                     const SvgOptions& opt = {}) {
  write_file_atomic(path, render_svg(traj, series, opt));
}

}  // namespace rlvr::runner
