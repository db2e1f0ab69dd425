#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdidkit/error.hpp"
#include "sdidkit/panel.hpp"

namespace sdidkit {

/// Population (n-denominator) central moments of a series.
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  double sd() const { return std::sqrt(m2); }
  /// Standardized third moment; NaN for a constant series.
  double skewness() const {
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : std::numeric_limits<double>::quiet_NaN();
  }
  /// Standardized fourth moment (3 for a normal distribution); NaN for a constant series.
  double kurtosis() const {
    return m2 > 0.0 ? m4 / (m2 * m2) : std::numeric_limits<double>::quiet_NaN();
  }
};

inline Moments central_moments(std::span<const double> xs) {
  Moments m;
  m.n = xs.size();
  if (xs.empty()) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(m.n);
  for (double x : xs) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  const double n = static_cast<double>(m.n);
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  // Series that are constant up to rounding would otherwise produce huge
  // standardized moments from cancellation noise.
  const double scale = std::max(std::abs(m.mean), 1e-300);
  if (m.m2 <= 1e-28 * scale * scale) m.m2 = m.m3 = m.m4 = 0.0;
  return m;
}

struct JarqueBeraResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // fewer than 4 points or a constant series
};

/// JB = n/6 (S^2 + (K-3)^2/4) with biased moment estimators; p from the
/// chi-square(2) upper tail, exp(-JB/2).
inline JarqueBeraResult jarque_bera(std::span<const double> xs) {
  JarqueBeraResult r;
  const Moments m = central_moments(xs);
  if (m.n < 4 || m.m2 <= 0.0) {
    r.degenerate = true;
    r.statistic = std::numeric_limits<double>::quiet_NaN();
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double s = m.skewness();
  const double k = m.kurtosis() - 3.0;
  r.statistic = static_cast<double>(m.n) / 6.0 * (s * s + k * k / 4.0);
  r.p_value = std::clamp(std::exp(-r.statistic / 2.0), 0.0, 1.0);
  return r;
}

/// One row of a group-level descriptive table.
struct StatsRow {
  std::string group;
  std::size_t obs = 0;
  std::size_t n_assets = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
  double skew = 0.0;  // NaN when sd == 0
  JarqueBeraResult jb;
};

inline StatsRow describe_series(std::span<const double> pooled, std::string group, std::size_t n_assets) {
  if (pooled.empty()) throw InputError("group '" + group + "' has no observations");
  StatsRow row;
  row.group = std::move(group);
  row.n_assets = n_assets;
  row.obs = pooled.size();
  const Moments m = central_moments(pooled);
  row.mean = m.mean;
  row.sd = m.sd();
  auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
  row.min = *lo;
  row.max = *hi;
  // Keep min <= mean <= max under rounding of the mean.
  row.mean = std::clamp(row.mean, row.min, row.max);
  row.skew = m.skewness();
  row.jb = jarque_bera(pooled);
  return row;
}

/// Pooled statistics over every (asset, day) return of the units labelled `group`.
inline StatsRow descriptive_stats(const Panel& panel, const std::string& group) {
  std::vector<double> pooled;
  std::size_t n_assets = 0;
  for (std::size_t i = 0; i < panel.n_units(); ++i) {
    if (panel.unit_groups.empty() || panel.unit_groups[i] != group) continue;
    ++n_assets;
    const auto row = panel.outcomes.row(static_cast<Eigen::Index>(i));
    pooled.insert(pooled.end(), row.begin(), row.end());
  }
  if (n_assets == 0) throw InputError("group '" + group + "' is empty");
  return describe_series(pooled, group, n_assets);
}

}  // namespace sdidkit
