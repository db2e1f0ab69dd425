#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/date.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/linalg.hpp"
#include "sdidkit/panel.hpp"

namespace sdidkit {

/// A dated attention proxy: a 0-100 search or news index, or its change.
struct AttentionSeries {
  std::vector<Date> dates;
  std::vector<double> values;
  std::string term;
  bool degenerate = false;
};

struct NewsRecord {
  Date date;
  std::string topic;
  double count = 0.0;  // articles per day
  double mean_sentiment = 0.0;  // -1 (mostly negative) .. +1 (mostly positive)
};

enum class DeltaKind {
  difference,      // G_t - G_{t-1}
  percent_change,  // 100 * (G_t - G_{t-1}) / G_{t-1}
};

/// First difference of an attention series; the first date is dropped.
inline AttentionSeries trends_delta(const AttentionSeries& s, DeltaKind kind = DeltaKind::difference) {
  if (s.values.size() < 2) throw InputError("attention series '" + s.term + "' needs at least two observations");
  if (s.dates.size() != s.values.size()) throw InputError("attention series dates and values differ in length");
  AttentionSeries out;
  out.term = s.term;
  for (std::size_t k = 1; k < s.values.size(); ++k) {
    double d = s.values[k] - s.values[k - 1];
    if (kind == DeltaKind::percent_change) {
      if (s.values[k - 1] == 0.0)
        throw InputError("percent change undefined after a zero reading of '" + s.term + "' on " +
                         format_date(s.dates[k - 1]));
      d = 100.0 * d / s.values[k - 1];
    }
    out.dates.push_back(s.dates[k]);
    out.values.push_back(d);
  }
  return out;
}

/// Sentiment-weighted news-count index: raw_t = count_t * (1 + sentiment_t) / 2,
/// min-max normalized to [0, 100] over the sample. A constant raw series gives
/// an all-zero index flagged as degenerate.
inline AttentionSeries institutional_index(std::vector<NewsRecord> records) {
  if (records.size() < 2) throw InputError("institutional index needs at least two dates");
  std::sort(records.begin(), records.end(), [](const auto& l, const auto& r) { return l.date < r.date; });
  AttentionSeries out;
  out.term = records.front().topic;
  std::vector<double> raw;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    if (k > 0 && records[k - 1].date == r.date)
      throw InputError("duplicate news record for '" + r.topic + "' on " + format_date(r.date));
    if (!(r.count >= 0.0)) throw InputError("negative news count on " + format_date(r.date));
    if (!(r.mean_sentiment >= -1.0 && r.mean_sentiment <= 1.0))
      throw InputError("mean sentiment outside [-1, 1] on " + format_date(r.date));
    out.dates.push_back(r.date);
    raw.push_back(r.count * (1.0 + r.mean_sentiment) / 2.0);
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    out.values.assign(raw.size(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (double v : raw) out.values.push_back(std::clamp(100.0 * (v - *lo) / range, 0.0, 100.0));
  return out;
}

/// Heteroskedasticity-consistent sandwich (X'X)^{-1} (sum x_i x_i' e_i^2) (X'X)^{-1}.
inline MatrixXd white_vcov(const MatrixXd& x, const VectorXd& resid) {
  if (x.rows() != resid.size()) throw InputError("design and residual lengths differ");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw IdentificationError("White covariance needs a full-rank design");
  const MatrixXd bread = (x.transpose() * x).ldlt().solve(MatrixXd::Identity(x.cols(), x.cols()));
  const MatrixXd xe = x.array().colwise() * resid.array();
  const MatrixXd meat = xe.transpose() * xe;
  MatrixXd v = bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

/// Labels of the four cell slopes, in regression order.
inline constexpr std::array<const char*, 4> kSlopeLabels{"beta1", "beta2", "beta3", "beta4"};
inline constexpr std::array<const char*, 4> kSlopeCells{"pre-launch non-AI", "pre-launch AI", "post-launch non-AI",
                                                        "post-launch AI"};

struct AttentionRegressionResult {
  double alpha = 0.0;
  std::array<double, 4> beta{};
  std::array<double, 5> robust_se{};  // alpha, beta1..beta4
  MatrixXd vcov;                      // over (alpha, beta1..beta4)
  std::map<std::string, double> wald_p;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n_obs = 0;
  double df_resid = 0.0;
  VectorXd fitted;
};

struct InteractionOptions {
  bool unit_fixed_effects = false;  // adds unit dummies; alpha is then the first unit's intercept
};

namespace detail {

inline Index coefficient_slot(const std::string& label) {
  if (label == "alpha") return 0;
  for (std::size_t k = 0; k < kSlopeLabels.size(); ++k)
    if (label == kSlopeLabels[k]) return static_cast<Index>(k + 1);
  throw InputError("unknown coefficient '" + label + "'");
}

}  // namespace detail

/// F-test of beta_a = beta_b with the robust covariance, against F(1, n - k).
inline double wald_equality_test(const AttentionRegressionResult& r, const std::string& a, const std::string& b) {
  const Index i = detail::coefficient_slot(a);
  const Index j = detail::coefficient_slot(b);
  if (r.vcov.rows() < 5) throw IdentificationError("regression result carries no covariance");
  auto coef = [&](Index s) { return s == 0 ? r.alpha : r.beta[static_cast<std::size_t>(s - 1)]; };
  const double diff = coef(i) - coef(j);
  const double var = r.vcov(i, i) + r.vcov(j, j) - 2.0 * r.vcov(i, j);
  if (!std::isfinite(diff) || !std::isfinite(var)) throw IdentificationError("coefficient not identified");
  double f = 0.0;
  if (var > 0.0) f = diff * diff / var;
  else if (std::abs(diff) > 0.0) f = std::numeric_limits<double>::infinity();
  return f_upper_tail(f, 1.0, r.df_resid);
}

/// Pooled regression r_it = alpha + [beta_cell(i,t)] * dG_t + e_it, with four
/// mutually exclusive cells (pre/post launch x non-AI/AI) and White standard
/// errors. Observations whose date has no attention change are skipped.
inline AttentionRegressionResult interaction_regression(const Panel& panel, const AttentionSeries& delta,
                                                        const std::vector<bool>& ai_flags, Date launch_date,
                                                        const InteractionOptions& opt = {}) {
  if (ai_flags.size() != panel.n_units()) throw InputError("one AI flag per panel unit is required");
  if (delta.dates.size() != delta.values.size()) throw InputError("attention dates and values differ in length");
  std::map<Date, double> dg;
  for (std::size_t k = 0; k < delta.dates.size(); ++k) dg[delta.dates[k]] = delta.values[k];

  const bool any_ai = std::find(ai_flags.begin(), ai_flags.end(), true) != ai_flags.end();
  const bool any_non_ai = std::find(ai_flags.begin(), ai_flags.end(), false) != ai_flags.end();
  if (!any_ai || !any_non_ai) throw InputError("attention regression needs both AI and non-AI units");

  std::vector<Index> periods;
  bool any_pre = false, any_post = false;
  for (std::size_t t = 0; t < panel.dates.size(); ++t) {
    if (!dg.contains(panel.dates[t])) continue;
    periods.push_back(static_cast<Index>(t));
    (panel.dates[t] < launch_date ? any_pre : any_post) = true;
  }
  if (!any_pre || !any_post) throw InputError("attention regression needs dates before and after the launch");

  const auto nu = static_cast<Index>(panel.n_units());
  const auto np = static_cast<Index>(periods.size());
  const Index n = nu * np;
  const Index fe = opt.unit_fixed_effects ? nu - 1 : 0;
  MatrixXd x = MatrixXd::Zero(n, 5 + fe);
  VectorXd y(n);
  std::array<bool, 4> cell_has_signal{};
  std::vector<std::string> names{"alpha", "beta1", "beta2", "beta3", "beta4"};
  for (Index i = 1; i <= fe; ++i) names.push_back("unit:" + panel.units[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < nu; ++i) {
    for (Index p = 0; p < np; ++p) {
      const Index r = i * np + p;
      const Index t = periods[static_cast<std::size_t>(p)];
      const Date d = panel.dates[static_cast<std::size_t>(t)];
      const double g = dg.at(d);
      const int cell = (d < launch_date ? 0 : 2) + (ai_flags[static_cast<std::size_t>(i)] ? 1 : 0);
      x(r, 0) = 1.0;
      x(r, 1 + cell) = g;
      if (g != 0.0) cell_has_signal[static_cast<std::size_t>(cell)] = true;
      if (fe > 0 && i > 0) x(r, 4 + i) = 1.0;
      y(r) = panel.outcomes(i, t);
    }
  }
  for (std::size_t c = 0; c < 4; ++c)
    if (!cell_has_signal[c])
      throw IdentificationError(std::string("attention change is identically zero in the ") + kSlopeCells[c] +
                                " cell; " + kSlopeLabels[c] + " is not identified");

  const OlsFit fit = ols_fit(x, y, names);
  const MatrixXd v = white_vcov(x, fit.resid);

  AttentionRegressionResult res;
  res.alpha = fit.coef(0);
  for (std::size_t k = 0; k < 4; ++k) res.beta[k] = fit.coef(static_cast<Index>(k + 1));
  res.vcov = v.topLeftCorner(5, 5);
  for (Index k = 0; k < 5; ++k) res.robust_se[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, v(k, k)));
  res.n_obs = static_cast<std::size_t>(n);
  res.df_resid = static_cast<double>(n - x.cols());
  const double tss = (y.array() - y.mean()).square().sum();
  res.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 0.0;
  res.adj_r2 = tss > 0.0 ? 1.0 - (fit.rss / res.df_resid) / (tss / static_cast<double>(n - 1)) : 0.0;
  res.fitted = y - fit.resid;
  res.wald_p["b1=b2"] = wald_equality_test(res, "beta1", "beta2");
  res.wald_p["b3=b4"] = wald_equality_test(res, "beta3", "beta4");
  res.wald_p["b1=b3"] = wald_equality_test(res, "beta1", "beta3");
  res.wald_p["b2=b4"] = wald_equality_test(res, "beta2", "beta4");
  return res;
}

}  // namespace sdidkit
