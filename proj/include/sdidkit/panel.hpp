#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/date.hpp"
#include "sdidkit/error.hpp"

namespace sdidkit {

/// One daily observation of one asset, as read from the price CSV.
struct RawRecord {
  Date date;
  std::string asset_id;
  double price = 0.0;       // quote currency
  double volume = 0.0;      // quote currency per day
  double market_cap = 0.0;  // quote currency
  std::string group;        // basket label, e.g. "GAI" or "GCKO"
};

/// Strictly balanced N x T panel of log returns.
///
/// Row i of every matrix belongs to units[i]; column t to dates[t]. When built
/// for a treatment comparison, control units come first and treated units last.
struct Panel {
  std::vector<std::string> units;
  std::vector<std::string> unit_groups;
  std::vector<Date> dates;
  Eigen::MatrixXd outcomes;
  std::map<std::string, Eigen::MatrixXd> covariates;

  std::size_t n_units() const { return static_cast<std::size_t>(outcomes.rows()); }
  std::size_t n_periods() const { return static_cast<std::size_t>(outcomes.cols()); }

  std::optional<std::size_t> unit_index(const std::string& id) const {
    auto it = std::find(units.begin(), units.end(), id);
    if (it == units.end()) return std::nullopt;
    return static_cast<std::size_t>(it - units.begin());
  }

  /// Throws InputError when the shape or balance invariants are broken.
  void validate() const {
    const auto n = outcomes.rows();
    const auto t = outcomes.cols();
    if (static_cast<Eigen::Index>(units.size()) != n)
      throw InputError("panel: unit labels do not match outcome rows");
    if (!unit_groups.empty() && unit_groups.size() != units.size())
      throw InputError("panel: group labels do not match outcome rows");
    if (!dates.empty() && static_cast<Eigen::Index>(dates.size()) != t)
      throw InputError("panel: dates do not match outcome columns");
    for (std::size_t k = 1; k < dates.size(); ++k)
      if (!(dates[k - 1] < dates[k])) throw InputError("panel: dates must be strictly increasing");
    if (!outcomes.allFinite()) throw InputError("panel: outcomes contain missing or non-finite cells");
    for (const auto& [name, m] : covariates) {
      if (m.rows() != n || m.cols() != t)
        throw InputError("panel: covariate '" + name + "' has a different shape than outcomes");
      if (!m.allFinite()) throw InputError("panel: covariate '" + name + "' contains non-finite cells");
    }
  }

  /// Sub-panel restricted to the given rows, preserving their order.
  Panel select_units(std::span<const std::size_t> rows) const {
    Panel out;
    out.dates = dates;
    out.outcomes.resize(static_cast<Eigen::Index>(rows.size()), outcomes.cols());
    for (const auto& [name, m] : covariates) out.covariates[name].resize(out.outcomes.rows(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(rows[r]);
      const auto dst = static_cast<Eigen::Index>(r);
      out.units.push_back(units[rows[r]]);
      if (!unit_groups.empty()) out.unit_groups.push_back(unit_groups[rows[r]]);
      out.outcomes.row(dst) = outcomes.row(src);
      for (const auto& [name, m] : covariates) out.covariates[name].row(dst) = m.row(src);
    }
    return out;
  }

  /// Sub-panel restricted to the first `count` periods.
  Panel leading_periods(std::size_t count) const {
    Panel out;
    out.units = units;
    out.unit_groups = unit_groups;
    const auto c = static_cast<Eigen::Index>(count);
    if (!dates.empty()) out.dates.assign(dates.begin(), dates.begin() + c);
    out.outcomes = outcomes.leftCols(c);
    for (const auto& [name, m] : covariates) out.covariates[name] = m.leftCols(c);
    return out;
  }
};

/// r_t = ln(p_t / p_{t-1}) for each consecutive pair of prices.
inline std::vector<double> compute_log_returns(std::span<const double> prices,
                                               const std::string& asset_id = {},
                                               std::span<const Date> dates = {}) {
  if (prices.size() < 2) throw InputError("log returns need at least two prices");
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (!(prices[k] > 0.0) || !std::isfinite(prices[k])) {
      std::string where = asset_id.empty() ? "index " + std::to_string(k) : "asset " + asset_id;
      if (k < dates.size()) where += " on " + format_date(dates[k]);
      throw InputError("non-positive price at " + where);
    }
  }
  std::vector<double> out(prices.size() - 1);
  for (std::size_t k = 1; k < prices.size(); ++k) out[k - 1] = std::log(prices[k] / prices[k - 1]);
  return out;
}

struct DroppedAsset {
  std::string asset_id;
  std::string reason;
};

struct BalanceReport {
  std::vector<DroppedAsset> dropped;
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::vector<std::string> warnings;
};

enum class LiquidityRule {
  any_day,      // drop if volume is below the floor on any day
  average_day,  // drop if mean daily volume is below the floor
};

struct BuildOptions {
  double liquidity_floor = 20000.0;
  LiquidityRule liquidity_rule = LiquidityRule::any_day;
};

struct BuildResult {
  Panel panel;
  BalanceReport report;
};

namespace detail {

inline void validate_records(std::span<const RawRecord> records) {
  std::set<std::tuple<std::string, std::string, Date>> seen;
  for (const auto& r : records) {
    const std::string where = " for asset " + r.asset_id + " on " + format_date(r.date);
    if (!(r.price > 0.0) || !std::isfinite(r.price)) throw InputError("non-positive price" + where);
    if (!(r.volume >= 0.0)) throw InputError("negative volume" + where);
    if (!(r.market_cap >= 0.0)) throw InputError("negative market cap" + where);
    if (!seen.emplace(r.group, r.asset_id, r.date).second) throw InputError("duplicate record" + where);
  }
}

}  // namespace detail

/// Builds a strictly balanced return panel from the records whose group label is
/// in `groups`. Rows are ordered by group (in the order given) and then by first
/// appearance in `records`.
///
/// The panel calendar is the intersection of the group calendars, so a
/// trading-day index combined with daily assets keeps only common days (a
/// warning is recorded). The first calendar day is consumed by differencing.
inline BuildResult build_group_panel(std::span<const RawRecord> records,
                                     const std::vector<std::string>& groups,
                                     const BuildOptions& options = {}) {
  detail::validate_records(records);

  struct AssetSeries {
    std::string group;
    std::string id;
    std::map<Date, const RawRecord*> by_date;
  };
  std::vector<AssetSeries> assets;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::map<std::string, std::set<Date>> calendars;
  for (const auto& r : records) {
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) continue;
    auto key = std::make_pair(r.group, r.asset_id);
    auto [it, inserted] = index.emplace(key, assets.size());
    if (inserted) assets.push_back({r.group, r.asset_id, {}});
    assets[it->second].by_date.emplace(r.date, &r);
    calendars[r.group].insert(r.date);
  }

  BuildResult result;
  auto& report = result.report;

  std::set<Date> calendar;
  bool first = true;
  for (const auto& g : groups) {
    auto it = calendars.find(g);
    if (it == calendars.end()) continue;
    if (first) {
      calendar = it->second;
      first = false;
      continue;
    }
    std::set<Date> common;
    std::set_intersection(calendar.begin(), calendar.end(), it->second.begin(), it->second.end(),
                          std::inserter(common, common.end()));
    if (common.size() != calendar.size() || common.size() != it->second.size())
      report.warnings.push_back("group calendars differ; using the " + std::to_string(common.size()) +
                                " common dates");
    calendar = std::move(common);
  }
  if (calendar.size() < 2) throw InputError("fewer than two common dates across the requested groups");
  const std::vector<Date> days(calendar.begin(), calendar.end());

  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < assets.size(); ++a) {
    const auto& s = assets[a];
    std::size_t missing = 0;
    for (Date d : days)
      if (!s.by_date.contains(d)) ++missing;
    if (missing > 0) {
      report.dropped.push_back({s.id, "missing " + std::to_string(missing) + " of " +
                                          std::to_string(days.size()) + " days"});
      continue;
    }
    double min_vol = std::numeric_limits<double>::infinity();
    double sum_vol = 0.0;
    for (Date d : days) {
      const double v = s.by_date.at(d)->volume;
      min_vol = std::min(min_vol, v);
      sum_vol += v;
    }
    const double mean_vol = sum_vol / static_cast<double>(days.size());
    const bool illiquid = options.liquidity_rule == LiquidityRule::any_day
                              ? min_vol < options.liquidity_floor
                              : mean_vol < options.liquidity_floor;
    if (illiquid) {
      const double shown = options.liquidity_rule == LiquidityRule::any_day ? min_vol : mean_vol;
      report.dropped.push_back({s.id, std::string(options.liquidity_rule == LiquidityRule::any_day
                                                      ? "minimum"
                                                      : "average") +
                                          " daily volume " + std::to_string(shown) +
                                          " below liquidity floor " +
                                          std::to_string(options.liquidity_floor)});
      continue;
    }
    kept.push_back(a);
  }

  std::vector<std::size_t> order;
  for (const auto& g : groups)
    for (std::size_t a : kept)
      if (assets[a].group == g) order.push_back(a);

  const auto n = static_cast<Eigen::Index>(order.size());
  const auto t = static_cast<Eigen::Index>(days.size() - 1);
  Panel& panel = result.panel;
  panel.dates.assign(days.begin() + 1, days.end());
  panel.outcomes.resize(n, t);
  Eigen::MatrixXd ln_vol(n, t), ln_cap(n, t);
  bool vol_ok = true, cap_ok = true;

  std::map<std::string, int> id_count;
  for (std::size_t a : order) ++id_count[assets[a].id];

  std::vector<double> prices(days.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = assets[order[static_cast<std::size_t>(i)]];
    panel.units.push_back(id_count[s.id] > 1 ? s.group + ":" + s.id : s.id);
    panel.unit_groups.push_back(s.group);
    for (std::size_t k = 0; k < days.size(); ++k) prices[k] = s.by_date.at(days[k])->price;
    auto r = compute_log_returns(prices, s.id, days);
    for (Eigen::Index k = 0; k < t; ++k) {
      panel.outcomes(i, k) = r[static_cast<std::size_t>(k)];
      const RawRecord* rec = s.by_date.at(days[static_cast<std::size_t>(k) + 1]);
      if (rec->volume > 0.0) ln_vol(i, k) = std::log(rec->volume); else vol_ok = false;
      if (rec->market_cap > 0.0) ln_cap(i, k) = std::log(rec->market_cap); else cap_ok = false;
    }
  }
  if (n > 0) {
    if (vol_ok) panel.covariates["ln_vol"] = std::move(ln_vol);
    else report.warnings.push_back("ln_vol not attached: some retained volumes are zero");
    if (cap_ok) panel.covariates["ln_cap"] = std::move(ln_cap);
    else report.warnings.push_back("ln_cap not attached: some retained market caps are zero");
  }

  report.n_units = static_cast<std::size_t>(n);
  report.n_periods = static_cast<std::size_t>(t);
  panel.validate();
  return result;
}

/// Balanced treated-vs-control panel: controls first, treated last.
inline BuildResult build_panel(std::span<const RawRecord> records, const std::string& treated_group,
                               const std::string& control_group, const BuildOptions& options = {}) {
  auto result = build_group_panel(records, {control_group, treated_group}, options);
  auto count = [&](const std::string& g) {
    return std::count(result.panel.unit_groups.begin(), result.panel.unit_groups.end(), g);
  };
  if (count(treated_group) == 0)
    throw InputError("treated group '" + treated_group + "' is empty after filtering");
  if (count(control_group) == 0)
    throw InputError("control group '" + control_group + "' is empty after filtering");
  return result;
}

}  // namespace sdidkit
