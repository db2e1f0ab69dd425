#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sdidkit::svg {

/// Minimal multi-series line chart. A dashed vertical rule marks `marker`
/// (an index into the series) when it lies inside the range.
inline std::string line_chart(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                              std::size_t marker, const std::string& title) {
  constexpr double w = 640, h = 360, left = 60, right = 20, top = 40, bottom = 40;
  static const char* colors[] = {"#c0392b", "#2c3e50", "#27ae60", "#8e44ad"};
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& [name, v] : series) {
    n = std::max(n, v.size());
    for (double x : v)
      if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi == lo) hi = lo + 1.0;
  auto px = [&](std::size_t k) { return left + (n > 1 ? (w - left - right) * static_cast<double>(k) / static_cast<double>(n - 1) : 0.0); };
  auto py = [&](double y) { return top + (h - top - bottom) * (hi - y) / (hi - lo); };

  std::ostringstream s;
  char buf[128];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  for (double y : {lo, hi}) {
    std::snprintf(buf, sizeof buf, "%.4g", y);
    s << "<text x=\"4\" y=\"" << py(y) + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  }
  if (marker > 0 && marker < n) {
    const double x = (px(marker - 1) + px(marker)) / 2.0;
    s << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << h - bottom
      << "\" stroke=\"gray\" stroke-dasharray=\"4,4\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& [name, v] = series[k];
    s << "<polyline fill=\"none\" stroke=\"" << colors[k % 4] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < v.size(); ++t) {
      if (!std::isfinite(v[t])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(t), py(v[t]));
      s << buf;
    }
    s << "\"/>\n";
    s << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 14.0 * static_cast<double>(k) << "\" fill=\"" << colors[k % 4]
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace sdidkit::svg
