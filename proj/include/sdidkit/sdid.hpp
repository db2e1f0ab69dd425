#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/did.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/linalg.hpp"
#include "sdidkit/panel.hpp"
#include "sdidkit/simplex.hpp"

namespace sdidkit {

/// Unit weights over controls and time weights over pre-treatment periods.
/// Treated units implicitly weigh 1/N_tr each and post periods 1/T_post each.
struct SdidWeights {
  double omega0 = 0.0;
  VectorXd omega;
  double lambda0 = 0.0;
  VectorXd lambda;
  double zeta = 0.0;
};

struct ZetaResult {
  double zeta = 0.0;
  double sigma = 0.0;    // sd of one-period changes of control pre-treatment outcomes
  double scaling = 0.0;  // (N_tr * T_post)^(1/4) unless overridden
  bool degenerate = false;
};

/// zeta = (N_tr * T_post)^(1/4) * sd(first differences of control pre-period outcomes).
/// The sd uses the n-1 denominator. A constant control block gives zeta = 0 and
/// sets `degenerate`.
inline ZetaResult compute_zeta(const Panel& panel, const TreatmentAssignment& a,
                               std::optional<double> scaling_override = std::nullopt) {
  const UnitSplit s = split_units(panel, a, 2);
  std::vector<double> diffs;
  diffs.reserve(s.controls.size() * (a.t_pre - 1));
  for (std::size_t i : s.controls)
    for (std::size_t t = 1; t < a.t_pre; ++t)
      diffs.push_back(panel.outcomes(static_cast<Index>(i), static_cast<Index>(t)) -
                      panel.outcomes(static_cast<Index>(i), static_cast<Index>(t - 1)));
  ZetaResult z;
  z.scaling = scaling_override ? *scaling_override
                               : std::pow(static_cast<double>(s.treated.size()) * static_cast<double>(a.t_post), 0.25);
  if (diffs.size() >= 2) {
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    z.sigma = std::sqrt(ss / static_cast<double>(diffs.size() - 1));
  }
  if (!(z.sigma > 0.0)) {
    z.sigma = 0.0;
    z.degenerate = true;
  }
  z.zeta = z.scaling * z.sigma;
  return z;
}

struct UnitWeightFit {
  double omega0 = 0.0;
  VectorXd omega;
  SolverReport report;
};

struct TimeWeightFit {
  double lambda0 = 0.0;
  VectorXd lambda;
  SolverReport report;
  bool degenerate = false;  // single control unit: every feasible lambda is optimal
};

namespace detail {

inline VectorXd treated_mean_series(const Panel& panel, const UnitSplit& s, Index from, Index count) {
  VectorXd m = VectorXd::Zero(count);
  for (std::size_t i : s.treated) m += panel.outcomes.row(static_cast<Index>(i)).segment(from, count).transpose();
  return m / static_cast<double>(s.treated.size());
}

}  // namespace detail

/// The unit-weight regression problem: pre-period rows, one column per control,
/// target the treated average, ridge zeta^2 * T_pre.
inline SimplexLsProblem unit_weight_problem(const Panel& panel, const TreatmentAssignment& a, double zeta) {
  const UnitSplit s = split_units(panel, a, 1);
  const auto t_pre = static_cast<Index>(a.t_pre);
  SimplexLsProblem p;
  p.a.resize(t_pre, static_cast<Index>(s.controls.size()));
  for (std::size_t j = 0; j < s.controls.size(); ++j)
    p.a.col(static_cast<Index>(j)) = panel.outcomes.row(static_cast<Index>(s.controls[j])).head(t_pre).transpose();
  p.b = detail::treated_mean_series(panel, s, 0, t_pre);
  p.ridge = zeta * zeta * static_cast<double>(t_pre);
  return p;
}

/// The time-weight regression problem: one row per control, one column per
/// pre-period, target that control's post-period mean, no ridge.
inline SimplexLsProblem time_weight_problem(const Panel& panel, const TreatmentAssignment& a) {
  const UnitSplit s = split_units(panel, a, 1);
  const auto t_pre = static_cast<Index>(a.t_pre);
  const auto t_post = static_cast<Index>(a.t_post);
  SimplexLsProblem p;
  p.a.resize(static_cast<Index>(s.controls.size()), t_pre);
  p.b.resize(static_cast<Index>(s.controls.size()));
  for (std::size_t j = 0; j < s.controls.size(); ++j) {
    const auto row = panel.outcomes.row(static_cast<Index>(s.controls[j]));
    p.a.row(static_cast<Index>(j)) = row.head(t_pre);
    p.b(static_cast<Index>(j)) = row.segment(t_pre, t_post).mean();
  }
  p.ridge = 0.0;
  return p;
}

inline UnitWeightFit solve_unit_weights(const Panel& panel, const TreatmentAssignment& a, double zeta,
                                        const SimplexLsOptions& opt = {}) {
  if (!(zeta >= 0.0)) throw InputError("zeta must be non-negative");
  auto sol = simplex_ls_minimize(unit_weight_problem(panel, a, zeta), opt);
  return {sol.intercept, std::move(sol.weights), sol.report};
}

inline TimeWeightFit solve_time_weights(const Panel& panel, const TreatmentAssignment& a,
                                        const SimplexLsOptions& opt = {}) {
  const SimplexLsProblem p = time_weight_problem(panel, a);
  auto sol = simplex_ls_minimize(p, opt);
  TimeWeightFit f{sol.intercept, std::move(sol.weights), sol.report, p.a.rows() == 1};
  return f;
}

inline void check_weights(const Panel& panel, const TreatmentAssignment& a, const SdidWeights& w) {
  const UnitSplit s = split_units(panel, a, 1);
  if (static_cast<std::size_t>(w.omega.size()) != s.controls.size())
    throw InputError("unit weights have " + std::to_string(w.omega.size()) + " entries for " +
                     std::to_string(s.controls.size()) + " controls");
  if (static_cast<std::size_t>(w.lambda.size()) != a.t_pre)
    throw InputError("time weights have " + std::to_string(w.lambda.size()) + " entries for " +
                     std::to_string(a.t_pre) + " pre-treatment periods");
  auto on_simplex = [](const VectorXd& v) { return v.minCoeff() >= 0.0 && std::abs(v.sum() - 1.0) <= 1e-9; };
  if (!on_simplex(w.omega)) throw InputError("unit weights are not on the simplex");
  if (!on_simplex(w.lambda)) throw InputError("time weights are not on the simplex");
}

/// Uniform weights; with these the estimator reduces to plain DID.
inline SdidWeights uniform_weights(const Panel& panel, const TreatmentAssignment& a) {
  const UnitSplit s = split_units(panel, a, 1);
  SdidWeights w;
  w.omega = VectorXd::Constant(static_cast<Index>(s.controls.size()), 1.0 / static_cast<double>(s.controls.size()));
  w.lambda = VectorXd::Constant(static_cast<Index>(a.t_pre), 1.0 / static_cast<double>(a.t_pre));
  return w;
}

/// Weighted double difference:
/// (treated post mean - lambda-weighted treated pre mean)
///   - sum_i omega_i (control_i post mean - lambda-weighted control_i pre mean).
inline double sdid_att(const Panel& panel, const TreatmentAssignment& a, const SdidWeights& w) {
  check_weights(panel, a, w);
  const UnitSplit s = split_units(panel, a, 1);
  const auto t_pre = static_cast<Index>(a.t_pre);
  const auto t_post = static_cast<Index>(a.t_post);
  auto contrast = [&](Index row) {
    const auto r = panel.outcomes.row(row);
    return r.segment(t_pre, t_post).mean() - r.head(t_pre).dot(w.lambda.transpose());
  };
  double treated = 0.0;
  for (std::size_t i : s.treated) treated += contrast(static_cast<Index>(i));
  treated /= static_cast<double>(s.treated.size());
  double control = 0.0;
  for (std::size_t j = 0; j < s.controls.size(); ++j) control += w.omega(static_cast<Index>(j)) * contrast(static_cast<Index>(s.controls[j]));
  return treated - control;
}

/// The same estimate from the weighted two-way fixed-effects regression
/// (weights omega_i * lambda_t, one unit and one time effect normalized to zero).
/// Observations with zero weight are left out.
inline double sdid_att_regression(const Panel& panel, const TreatmentAssignment& a, const SdidWeights& w) {
  check_weights(panel, a, w);
  const UnitSplit s = split_units(panel, a, 1);
  const auto t_pre = static_cast<Index>(a.t_pre);
  const auto t = static_cast<Index>(panel.n_periods());
  VectorXd unit_w = VectorXd::Zero(static_cast<Index>(panel.n_units()));
  for (std::size_t j = 0; j < s.controls.size(); ++j) unit_w(static_cast<Index>(s.controls[j])) = w.omega(static_cast<Index>(j));
  for (std::size_t i : s.treated) unit_w(static_cast<Index>(i)) = 1.0 / static_cast<double>(s.treated.size());
  VectorXd time_w(t);
  time_w.head(t_pre) = w.lambda;
  time_w.tail(t - t_pre).setConstant(1.0 / static_cast<double>(t - t_pre));

  std::vector<Index> units, periods;
  for (Index i = 0; i < unit_w.size(); ++i)
    if (unit_w(i) > 0.0) units.push_back(i);
  for (Index p = 0; p < t; ++p)
    if (time_w(p) > 0.0) periods.push_back(p);
  const auto nu = static_cast<Index>(units.size());
  const auto np = static_cast<Index>(periods.size());
  const Index k = 1 + (nu - 1) + (np - 1) + 1;
  MatrixXd x = MatrixXd::Zero(nu * np, k);
  VectorXd y(nu * np);
  std::set<std::size_t> treated(s.treated.begin(), s.treated.end());
  for (Index ui = 0; ui < nu; ++ui) {
    for (Index pi = 0; pi < np; ++pi) {
      const Index r = ui * np + pi;
      const Index i = units[static_cast<std::size_t>(ui)];
      const Index p = periods[static_cast<std::size_t>(pi)];
      const double sw = std::sqrt(unit_w(i) * time_w(p));
      x(r, 0) = sw;
      if (ui > 0) x(r, ui) = sw;
      if (pi > 0) x(r, nu - 1 + pi) = sw;
      if (treated.contains(static_cast<std::size_t>(i)) && p >= t_pre) x(r, k - 1) = sw;
      y(r) = sw * panel.outcomes(i, p);
    }
  }
  return ols_fit(x, y).coef(k - 1);
}

/// Replaces R_it by R_it - sum_c X_c,it * beta_c, with beta from the pooled
/// regression of R on an intercept and the named covariates.
inline Panel residualize_covariates(const Panel& panel, const std::vector<std::string>& names,
                                    VectorXd* beta_out = nullptr) {
  if (names.empty()) return panel;
  for (const auto& c : names)
    if (!panel.covariates.contains(c)) throw InputError("covariate '" + c + "' is not in the panel");
  const Index n = panel.outcomes.size();
  const auto k = static_cast<Index>(names.size());
  MatrixXd x(n, k + 1);
  x.col(0).setOnes();
  for (Index c = 0; c < k; ++c) {
    const MatrixXd& m = panel.covariates.at(names[static_cast<std::size_t>(c)]);
    x.col(c + 1) = Eigen::Map<const VectorXd>(m.data(), n);
  }
  const VectorXd y = Eigen::Map<const VectorXd>(panel.outcomes.data(), n);

  // Name the offending pair before handing the design to the solver.
  auto dependent = [](const MatrixXd& m) { return detail::first_dependent_column(m) >= 0; };
  for (Index c = 0; c < k; ++c) {
    MatrixXd one(n, 2);
    one << x.col(0), x.col(c + 1);
    if (dependent(one)) throw IdentificationError("covariate '" + names[static_cast<std::size_t>(c)] + "' is constant");
    for (Index d = c + 1; d < k; ++d) {
      MatrixXd pair(n, 3);
      pair << x.col(0), x.col(c + 1), x.col(d + 1);
      if (dependent(pair))
        throw IdentificationError("covariates '" + names[static_cast<std::size_t>(c)] + "' and '" +
                                  names[static_cast<std::size_t>(d)] + "' are collinear");
    }
  }
  std::vector<std::string> labels{"intercept"};
  labels.insert(labels.end(), names.begin(), names.end());
  const OlsFit fit = ols_fit(x, y, labels);
  Panel out = panel;
  for (Index c = 0; c < k; ++c)
    out.outcomes -= fit.coef(c + 1) * panel.covariates.at(names[static_cast<std::size_t>(c)]);
  if (beta_out) *beta_out = fit.coef.tail(k);
  return out;
}

struct SdidOptions {
  std::optional<double> zeta;          // overrides the data-driven zeta
  std::optional<double> zeta_scaling;  // overrides (N_tr * T_post)^(1/4)
  bool uniform = false;                // skip optimization, use uniform weights (reduces to DID)
  std::vector<std::string> covariates;
  bool residualize_per_replicate = false;
  std::size_t n_boot = 500;  // 0 disables bootstrap inference
  std::uint64_t seed = 42;
  unsigned threads = 1;
  double level = 0.95;
  SimplexLsOptions solver;
};

struct SdidFit {
  double tau_hat = 0.0;
  SdidWeights weights;
  SolverReport unit_report;
  SolverReport time_report;
  std::vector<std::string> notes;
};

/// Point estimate on a panel whose covariates have already been handled.
inline SdidFit sdid_fit(const Panel& panel, const TreatmentAssignment& a, const SdidOptions& opt) {
  SdidFit f;
  if (opt.uniform) {
    f.weights = uniform_weights(panel, a);
    f.unit_report.converged = f.time_report.converged = true;
    f.tau_hat = sdid_att(panel, a, f.weights);
    return f;
  }
  double zeta = 0.0;
  if (opt.zeta) {
    zeta = *opt.zeta;
  } else {
    const ZetaResult z = compute_zeta(panel, a, opt.zeta_scaling);
    if (z.degenerate) f.notes.push_back("control pre-treatment outcomes are constant; zeta set to 0");
    zeta = z.zeta;
  }
  auto uw = solve_unit_weights(panel, a, zeta, opt.solver);
  auto tw = solve_time_weights(panel, a, opt.solver);
  if (tw.degenerate)
    f.notes.push_back("single control unit: time weights are not identified, minimum-norm (uniform) weights used");
  f.weights = {uw.omega0, std::move(uw.omega), tw.lambda0, std::move(tw.lambda), zeta};
  f.unit_report = uw.report;
  f.time_report = tw.report;
  f.tau_hat = sdid_att(panel, a, f.weights);
  return f;
}

struct BootstrapResult {
  double se = 0.0;
  std::vector<double> replicate_taus;
  std::size_t failed = 0;
  std::size_t redraws = 0;
};

namespace detail {

/// Unbiased draw from [0, n) that does not depend on the standard library's
/// distribution implementations.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

inline std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                    0x5d1du};
  return std::mt19937_64(seq);
}

inline bool all_rows_identical(const MatrixXd& m) {
  for (Index i = 1; i < m.rows(); ++i)
    if (m.row(i) != m.row(0)) return false;
  return true;
}

}  // namespace detail

/// Stratified unit bootstrap: each replicate resamples N_co controls and N_tr
/// treated units with replacement, re-solves the weights and re-estimates tau.
/// Replicate b draws from an RNG stream derived from (seed, b), so the result
/// does not depend on the number of threads.
inline BootstrapResult bootstrap_variance(const Panel& panel, const TreatmentAssignment& a, std::size_t n_boot,
                                          std::uint64_t seed, const SdidOptions& opt = {}) {
  const UnitSplit s = split_units(panel, a, 2);
  if (n_boot < 2) throw InputError("bootstrap needs at least 2 replicates");
  // A single control (an index series) is kept in every replicate; only the
  // treated units are resampled then.
  if (s.treated.size() < 2) throw InputError("bootstrap needs at least 2 treated units");

  constexpr int max_attempts = 10;
  std::vector<double> taus(n_boot, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> attempts_used(n_boot, 0);

  SdidOptions inner = opt;
  inner.n_boot = 0;
  if (!opt.residualize_per_replicate) inner.covariates.clear();

  auto run_one = [&](std::size_t b) {
    auto rng = detail::replicate_stream(seed, b);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      attempts_used[b] = attempt + 1;
      std::vector<std::size_t> rows;
      rows.reserve(panel.n_units());
      for (std::size_t j = 0; j < s.controls.size(); ++j) rows.push_back(s.controls[detail::bounded_draw(rng, s.controls.size())]);
      for (std::size_t j = 0; j < s.treated.size(); ++j) rows.push_back(s.treated[detail::bounded_draw(rng, s.treated.size())]);
      Panel rep = panel.select_units(rows);
      if (detail::all_rows_identical(rep.outcomes)) continue;
      TreatmentAssignment ra{{}, a.t_pre, a.t_post};
      for (std::size_t j = s.controls.size(); j < rows.size(); ++j) {
        rep.units[j] = "treated#" + std::to_string(j);
        ra.treated_units.push_back(rep.units[j]);
      }
      for (std::size_t j = 0; j < s.controls.size(); ++j) rep.units[j] = "control#" + std::to_string(j);
      try {
        if (opt.residualize_per_replicate) rep = residualize_covariates(rep, opt.covariates);
        const double tau = sdid_fit(rep, ra, inner).tau_hat;
        if (!std::isfinite(tau)) continue;
        taus[b] = tau;
        return;
      } catch (const ConvergenceError&) {
        continue;
      } catch (const IdentificationError&) {
        continue;
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n_boot)));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_boot; ++b) run_one(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < n_boot; b = next++) run_one(b);
      });
  }

  BootstrapResult r;
  for (std::size_t b = 0; b < n_boot; ++b) {
    r.redraws += static_cast<std::size_t>(std::max(0, attempts_used[b] - 1));
    if (std::isfinite(taus[b])) r.replicate_taus.push_back(taus[b]);
    else ++r.failed;
  }
  if (static_cast<double>(r.failed) > 0.05 * static_cast<double>(n_boot))
    throw IdentificationError("bootstrap failed: " + std::to_string(r.failed) + " of " + std::to_string(n_boot) +
                              " replicates could not be estimated");
  const auto m = static_cast<double>(r.replicate_taus.size());
  double mean = 0.0;
  for (double t : r.replicate_taus) mean += t;
  mean /= m;
  double ss = 0.0;
  for (double t : r.replicate_taus) ss += (t - mean) * (t - mean);
  r.se = m > 1.0 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  return r;
}

struct SdidResult {
  AttEstimate att;
  SdidWeights weights;
  SolverReport unit_report;
  SolverReport time_report;
  std::vector<std::string> notes;
  std::vector<double> replicate_taus;
};

/// Full estimator: optional covariate residualization, weights, point estimate
/// and (when n_boot > 0) bootstrap standard error with a normal interval.
inline SdidResult sdid_estimate(const Panel& panel, const TreatmentAssignment& a, const SdidOptions& opt = {}) {
  split_units(panel, a, 2);
  const Panel adjusted = residualize_covariates(panel, opt.covariates);
  SdidFit fit = sdid_fit(adjusted, a, opt);
  SdidResult r;
  r.att.estimator = Estimator::sdid;
  r.att.tau_hat = fit.tau_hat;
  r.weights = std::move(fit.weights);
  r.unit_report = fit.unit_report;
  r.time_report = fit.time_report;
  r.notes = std::move(fit.notes);
  if (opt.n_boot > 0) {
    const Panel& source = opt.residualize_per_replicate ? panel : adjusted;
    BootstrapResult b = bootstrap_variance(source, a, opt.n_boot, opt.seed, opt);
    r.att.se = b.se;
    r.att.n_boot = opt.n_boot;
    r.replicate_taus = std::move(b.replicate_taus);
    if (b.failed > 0) r.notes.push_back(std::to_string(b.failed) + " bootstrap replicates failed");
  }
  const double crit = normal_quantile(0.5 + opt.level / 2.0);
  r.att.ci_low = r.att.tau_hat - crit * r.att.se;
  r.att.ci_high = r.att.tau_hat + crit * r.att.se;
  return r;
}

/// Per-period treated mean and omega-weighted control mean, for trend plots.
struct OutcomeTrends {
  VectorXd treated;
  VectorXd synthetic_control;
};

inline OutcomeTrends outcome_trends(const Panel& panel, const TreatmentAssignment& a, const VectorXd& omega) {
  const UnitSplit s = split_units(panel, a, 1);
  OutcomeTrends tr;
  const auto t = static_cast<Index>(panel.n_periods());
  tr.treated = detail::treated_mean_series(panel, s, 0, t);
  tr.synthetic_control = VectorXd::Zero(t);
  for (std::size_t j = 0; j < s.controls.size(); ++j)
    tr.synthetic_control += omega(static_cast<Index>(j)) * panel.outcomes.row(static_cast<Index>(s.controls[j])).transpose();
  return tr;
}

}  // namespace sdidkit
