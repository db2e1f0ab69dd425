#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/date.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/linalg.hpp"
#include "sdidkit/panel.hpp"

namespace sdidkit {

/// Block treatment: the listed units are treated in exactly the last t_post periods.
struct TreatmentAssignment {
  std::vector<std::string> treated_units;
  std::size_t t_pre = 0;
  std::size_t t_post = 0;
};

/// Row indices of the control and treated units of a panel, in panel order.
struct UnitSplit {
  std::vector<std::size_t> controls;
  std::vector<std::size_t> treated;
};

/// Checks the assignment against the panel and returns the unit split.
/// `min_pre` is the smallest number of pre-treatment periods the caller needs.
inline UnitSplit split_units(const Panel& panel, const TreatmentAssignment& a, std::size_t min_pre = 2) {
  if (a.t_pre < min_pre)
    throw InputError("assignment needs at least " + std::to_string(min_pre) + " pre-treatment periods, got " +
                     std::to_string(a.t_pre));
  if (a.t_post < 1) throw InputError("assignment needs at least one post-treatment period");
  if (a.t_pre + a.t_post != panel.n_periods())
    throw InputError("t_pre + t_post (" + std::to_string(a.t_pre + a.t_post) + ") differs from panel length " +
                     std::to_string(panel.n_periods()));
  std::set<std::string> treated(a.treated_units.begin(), a.treated_units.end());
  if (treated.empty()) throw InputError("assignment has no treated units");
  for (const auto& u : treated)
    if (!panel.unit_index(u)) throw InputError("treated unit '" + u + "' is not in the panel");
  UnitSplit s;
  for (std::size_t i = 0; i < panel.n_units(); ++i)
    (treated.contains(panel.units[i]) ? s.treated : s.controls).push_back(i);
  if (s.controls.empty()) throw InputError("assignment leaves no control units");
  return s;
}

/// Treats every unit of `treated_group` from the first panel date on or after
/// `treatment_date` (or strictly after it when `treated_on_date` is false).
inline TreatmentAssignment make_assignment(const Panel& panel, const std::string& treated_group, Date treatment_date,
                                           bool treated_on_date = true) {
  TreatmentAssignment a;
  for (std::size_t i = 0; i < panel.n_units(); ++i)
    if (i < panel.unit_groups.size() && panel.unit_groups[i] == treated_group) a.treated_units.push_back(panel.units[i]);
  std::size_t pre = 0;
  while (pre < panel.dates.size() &&
         (treated_on_date ? panel.dates[pre] < treatment_date : panel.dates[pre] <= treatment_date))
    ++pre;
  if (pre == 0 || pre == panel.dates.size())
    throw InputError("treatment date " + format_date(treatment_date) + " is not strictly inside the panel dates");
  a.t_pre = pre;
  a.t_post = panel.dates.size() - pre;
  return a;
}

enum class Estimator { did, sdid };

inline const char* to_string(Estimator e) { return e == Estimator::did ? "DID" : "SDID"; }

struct AttEstimate {
  double tau_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Estimator estimator = Estimator::did;
  std::string window;
  std::optional<std::size_t> n_boot;
  std::optional<double> df;  // Bell-McCaffrey degrees of freedom when a t interval is used
};

struct FTestResult {
  double f_stat = 0.0;
  double df_num = 1.0;
  double df_den = 1.0;
  double p = 1.0;
};

enum class ClusterMode { cr1, cr2 };

/// Truncates the post-treatment periods at the end of the calendar month lying
/// `months` after the first treated date. Pre-treatment periods are untouched.
inline std::pair<Panel, TreatmentAssignment> event_window(const Panel& panel, const TreatmentAssignment& a,
                                                          int months) {
  split_units(panel, a, 1);
  if (months < 1) throw InputError("event window must span at least one month");
  if (panel.dates.size() != panel.n_periods()) throw InputError("event windows need dated periods");
  const Date start = panel.dates[a.t_pre];
  const Date end = end_of_month_after(start, months);
  if (end > panel.dates.back())
    throw InputError("a " + std::to_string(months) + "-month window ends " + format_date(end) +
                     ", after the panel end " + format_date(panel.dates.back()));
  std::size_t last = a.t_pre;
  while (last + 1 < panel.dates.size() && panel.dates[last + 1] <= end) ++last;
  TreatmentAssignment out = a;
  out.t_post = last + 1 - a.t_pre;
  return {panel.leading_periods(last + 1), out};
}

namespace detail {

struct ClusterIndex {
  std::vector<std::vector<Index>> rows;
};

inline ClusterIndex group_clusters(std::span<const int> cluster_ids) {
  std::map<int, std::size_t> slot;
  ClusterIndex c;
  for (std::size_t r = 0; r < cluster_ids.size(); ++r) {
    auto [it, inserted] = slot.emplace(cluster_ids[r], c.rows.size());
    if (inserted) c.rows.emplace_back();
    c.rows[it->second].push_back(static_cast<Index>(r));
  }
  return c;
}

inline MatrixXd gather_rows(const MatrixXd& x, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

inline VectorXd gather(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = v(rows[r]);
  return out;
}

/// (I - H_gg)^{+1/2} for one cluster, with the singularity check on the residual.
inline MatrixXd cr2_adjustment(const MatrixXd& xg, const MatrixXd& bread, const VectorXd& eg, int cluster_id) {
  const Index m = xg.rows();
  MatrixXd ih = MatrixXd::Identity(m, m) - xg * bread * xg.transpose();
  ih = 0.5 * (ih + ih.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ih);
  const VectorXd& ev = es.eigenvalues();
  VectorXd d(m);
  const double tol = 1e-10;
  for (Index i = 0; i < m; ++i) {
    if (ev(i) > tol) {
      d(i) = 1.0 / std::sqrt(ev(i));
    } else {
      // Null directions of I - H_gg lie in the column space of X, so exact
      // residuals are orthogonal to them. Anything else means the block is
      // genuinely singular for this fit.
      const double comp = es.eigenvectors().col(i).dot(eg);
      if (std::abs(comp) > 1e-7 * std::max(1.0, eg.norm()))
        throw IdentificationError("CR2 adjustment block for cluster " + std::to_string(cluster_id) +
                                  " is singular; fall back to CR1");
      d(i) = 0.0;
    }
  }
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Cluster-robust sandwich covariance.
///
/// CR1 scales the plain sandwich by G/(G-1) * (n-1)/(n-k). CR2 (Bell-McCaffrey)
/// rescales each cluster's residuals by the symmetric inverse square root of
/// I - H_gg, using a pseudo-inverse for the null directions that cluster-level
/// fixed effects create.
inline MatrixXd cluster_robust_vcov(const MatrixXd& x, const VectorXd& resid, std::span<const int> cluster_ids,
                                    ClusterMode mode, const MatrixXd* bread_in = nullptr) {
  if (x.rows() != resid.size() || static_cast<Index>(cluster_ids.size()) != x.rows())
    throw InputError("design, residual and cluster lengths differ");
  const auto clusters = detail::group_clusters(cluster_ids);
  const auto g = static_cast<double>(clusters.rows.size());
  if (clusters.rows.size() < 2) throw InputError("cluster-robust variance needs at least two clusters");
  MatrixXd bread = bread_in ? *bread_in : MatrixXd((x.transpose() * x).inverse());
  const Index k = x.cols();
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (const auto& rows : clusters.rows) {
    MatrixXd xg = detail::gather_rows(x, rows);
    VectorXd eg = detail::gather(resid, rows);
    if (mode == ClusterMode::cr2) eg = detail::cr2_adjustment(xg, bread, eg, cluster_ids[static_cast<std::size_t>(rows.front())]) * eg;
    VectorXd score = xg.transpose() * eg;
    meat.noalias() += score * score.transpose();
  }
  MatrixXd v = bread * meat * bread;
  if (mode == ClusterMode::cr1) {
    const double n = static_cast<double>(x.rows());
    v *= g / (g - 1.0) * (n - 1.0) / (n - static_cast<double>(k));
  }
  return 0.5 * (v + v.transpose());
}

/// Standard error of coefficient `coef` under the cluster-robust covariance.
inline double cluster_robust_se(const MatrixXd& x, const VectorXd& resid, std::span<const int> cluster_ids,
                                ClusterMode mode, Index coef) {
  const MatrixXd v = cluster_robust_vcov(x, resid, cluster_ids, mode);
  return std::sqrt(std::max(0.0, v(coef, coef)));
}

/// Satterthwaite degrees of freedom of the CR2 variance of c'beta under a
/// homoskedastic working model (Bell and McCaffrey).
inline double bell_mccaffrey_df(const MatrixXd& x, std::span<const int> cluster_ids, const VectorXd& contrast,
                                const MatrixXd& bread) {
  const auto clusters = detail::group_clusters(cluster_ids);
  const auto gn = static_cast<Index>(clusters.rows.size());
  MatrixXd u(x.cols(), gn);
  VectorXd self(gn);
  const VectorXd mc = bread * contrast;
  for (Index g = 0; g < gn; ++g) {
    const auto& rows = clusters.rows[static_cast<std::size_t>(g)];
    MatrixXd xg = detail::gather_rows(x, rows);
    MatrixXd ih = MatrixXd::Identity(xg.rows(), xg.rows()) - xg * bread * xg.transpose();
    VectorXd ag = sym_inverse_sqrt(0.5 * (ih + ih.transpose()), 1e-10) * (xg * mc);
    self(g) = ag.squaredNorm();
    u.col(g) = xg.transpose() * ag;
  }
  MatrixXd b = MatrixXd(self.asDiagonal()) - u.transpose() * bread * u;
  const double tr = b.trace();
  const double tr2 = (b * b).trace();
  return tr2 > 0.0 ? tr * tr / tr2 : std::numeric_limits<double>::infinity();
}

struct DidOptions {
  ClusterMode cluster_mode = ClusterMode::cr2;
  bool t_interval = false;  // Bell-McCaffrey t critical value instead of 1.96
  double level = 0.95;
};

namespace detail {

/// Intercept, unit dummies (first unit dropped), time dummies (first period
/// dropped) and any extra columns appended on the right.
struct FeDesign {
  MatrixXd x;
  std::vector<std::string> names;
  std::vector<int> clusters;
};

inline FeDesign fixed_effects_design(const Panel& panel, std::size_t extra) {
  const auto n = static_cast<Index>(panel.n_units());
  const auto t = static_cast<Index>(panel.n_periods());
  const Index k = 1 + (n - 1) + (t - 1) + static_cast<Index>(extra);
  FeDesign d;
  d.x = MatrixXd::Zero(n * t, k);
  d.clusters.resize(static_cast<std::size_t>(n * t));
  d.names.push_back("intercept");
  for (Index i = 1; i < n; ++i) d.names.push_back("unit:" + panel.units[static_cast<std::size_t>(i)]);
  for (Index s = 1; s < t; ++s)
    d.names.push_back(panel.dates.empty() ? "period:" + std::to_string(s)
                                          : "period:" + format_date(panel.dates[static_cast<std::size_t>(s)]));
  for (Index i = 0; i < n; ++i) {
    for (Index s = 0; s < t; ++s) {
      const Index r = i * t + s;
      d.x(r, 0) = 1.0;
      if (i > 0) d.x(r, i) = 1.0;
      if (s > 0) d.x(r, n - 1 + s) = 1.0;
      d.clusters[static_cast<std::size_t>(r)] = static_cast<int>(i);
    }
  }
  return d;
}

inline VectorXd stacked_outcomes(const MatrixXd& m) {
  // Row-major stacking: observation (i, s) at i*T + s.
  VectorXd y(m.size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index s = 0; s < m.cols(); ++s) y(i * m.cols() + s) = m(i, s);
  return y;
}

inline AttEstimate finish_estimate(double tau, double se, std::optional<double> df, const DidOptions& opt) {
  AttEstimate e;
  e.estimator = Estimator::did;
  e.tau_hat = tau;
  e.se = se;
  double crit = normal_quantile(0.5 + opt.level / 2.0);
  if (opt.t_interval && df && std::isfinite(*df) && *df > 0.0) {
    crit = student_t_quantile(0.5 + opt.level / 2.0, *df);
    e.df = df;
  }
  e.ci_low = tau - crit * se;
  e.ci_high = tau + crit * se;
  return e;
}

}  // namespace detail

/// Two-way fixed-effects difference-in-differences.
///
/// Regresses R_it on unit dummies, time dummies, the named covariates and the
/// treatment indicator; one unit and one time dummy are dropped. Standard errors
/// are clustered by unit.
inline AttEstimate twfe_did(const Panel& panel, const TreatmentAssignment& a,
                            const std::vector<std::string>& covariates = {}, const DidOptions& opt = {}) {
  const UnitSplit split = split_units(panel, a);
  for (const auto& c : covariates)
    if (!panel.covariates.contains(c)) throw InputError("covariate '" + c + "' is not in the panel");
  auto d = detail::fixed_effects_design(panel, covariates.size() + 1);
  const auto t = static_cast<Index>(panel.n_periods());
  const Index base = d.x.cols() - static_cast<Index>(covariates.size()) - 1;
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    const MatrixXd& m = panel.covariates.at(covariates[c]);
    d.x.col(base + static_cast<Index>(c)) = detail::stacked_outcomes(m);
    d.names.push_back(covariates[c]);
  }
  const Index tau_col = d.x.cols() - 1;
  d.names.push_back("treatment");
  for (std::size_t i : split.treated)
    for (Index s = static_cast<Index>(a.t_pre); s < t; ++s) d.x(static_cast<Index>(i) * t + s, tau_col) = 1.0;

  const VectorXd y = detail::stacked_outcomes(panel.outcomes);
  const OlsFit fit = ols_fit(d.x, y, d.names);
  const MatrixXd v = cluster_robust_vcov(d.x, fit.resid, d.clusters, opt.cluster_mode, &fit.bread);
  const double se = std::sqrt(std::max(0.0, v(tau_col, tau_col)));
  std::optional<double> df;
  if (opt.t_interval) {
    VectorXd c = VectorXd::Zero(d.x.cols());
    c(tau_col) = 1.0;
    df = bell_mccaffrey_df(d.x, d.clusters, c, fit.bread);
  }
  return detail::finish_estimate(fit.coef(tau_col), se, df, opt);
}

enum class TrendTestForm {
  linear_trend,  // treated x linear time index
  event_study,   // treated x each pre-period dummy (last pre-period is the base)
};

struct TrendTestOptions {
  TrendTestForm form = TrendTestForm::linear_trend;
  ClusterMode cluster_mode = ClusterMode::cr2;
};

/// Pre-treatment parallel-trends F-test.
///
/// The linear form regresses pre-period outcomes on unit and time dummies plus
/// treated x t and tests that slope with the cluster-robust variance against
/// F(1, G-1). The event-study form tests the treated x period leads jointly with
/// the classical variance against F(q, n-k).
inline FTestResult parallel_trends_test(const Panel& panel, const TreatmentAssignment& a,
                                        const TrendTestOptions& opt = {}) {
  split_units(panel, a);
  if (a.t_pre < 3) throw InputError("parallel-trends test needs at least 3 pre-treatment periods");
  const Panel pre = panel.leading_periods(a.t_pre);
  const UnitSplit split = [&] {
    UnitSplit s;
    std::set<std::string> tr(a.treated_units.begin(), a.treated_units.end());
    for (std::size_t i = 0; i < pre.n_units(); ++i) (tr.contains(pre.units[i]) ? s.treated : s.controls).push_back(i);
    return s;
  }();
  const auto t = static_cast<Index>(pre.n_periods());
  const VectorXd y = detail::stacked_outcomes(pre.outcomes);

  if (opt.form == TrendTestForm::linear_trend) {
    auto d = detail::fixed_effects_design(pre, 1);
    const Index col = d.x.cols() - 1;
    d.names.push_back("treated_x_trend");
    for (std::size_t i : split.treated)
      for (Index s = 0; s < t; ++s) d.x(static_cast<Index>(i) * t + s, col) = static_cast<double>(s + 1);
    const OlsFit fit = ols_fit(d.x, y, d.names);
    const MatrixXd v = cluster_robust_vcov(d.x, fit.resid, d.clusters, opt.cluster_mode, &fit.bread);
    const double b = fit.coef(col);
    const double var = v(col, col);
    FTestResult r;
    r.df_num = 1.0;
    r.df_den = static_cast<double>(pre.n_units()) - 1.0;
    // A slope at rounding level (perfect pre-period fit) carries no evidence.
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    if (std::abs(b) <= 1e-12 * scale) r.f_stat = 0.0;
    else r.f_stat = var > 0.0 ? b * b / var : std::numeric_limits<double>::infinity();
    r.p = f_upper_tail(r.f_stat, r.df_num, r.df_den);
    return r;
  }

  const Index q = t - 1;
  auto d = detail::fixed_effects_design(pre, static_cast<std::size_t>(q));
  const Index first = d.x.cols() - q;
  for (Index s = 0; s < q; ++s) {
    d.names.push_back("treated_x_period:" + std::to_string(s));
    for (std::size_t i : split.treated) d.x(static_cast<Index>(i) * t + s, first + s) = 1.0;
  }
  const OlsFit fit = ols_fit(d.x, y, d.names);
  const MatrixXd v = classical_vcov(fit).block(first, first, q, q);
  const VectorXd b = fit.coef.tail(q);
  FTestResult r;
  r.df_num = static_cast<double>(q);
  r.df_den = static_cast<double>(fit.n - fit.k);
  Eigen::LDLT<MatrixXd> ldlt(v);
  const double w = b.dot(ldlt.solve(b));
  r.f_stat = std::max(0.0, w / static_cast<double>(q));
  if (!std::isfinite(r.f_stat)) r.f_stat = 0.0;
  r.p = f_upper_tail(r.f_stat, r.df_num, r.df_den);
  return r;
}

}  // namespace sdidkit
