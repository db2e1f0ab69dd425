#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdidkit/attention.hpp"
#include "sdidkit/date.hpp"
#include "sdidkit/did.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/linalg.hpp"
#include "sdidkit/panel.hpp"
#include "sdidkit/sdid.hpp"
#include "sdidkit/simplex.hpp"

namespace sdidkit {

/// Ground-truth description of a synthetic block-treatment panel:
///
///   y_it = a_i + b_t + g_i' f_t + tau * D_it + trend_divergence * t * [i treated] + e_it
///
/// Factors f_kt are Gaussian random walks. Treated loadings are drawn around
/// `treated_loading_shift` so treatment correlates with the factors.
struct PanelSpec {
  std::size_t n_co = 20;
  std::size_t n_tr = 5;
  std::size_t t_pre = 20;
  std::size_t t_post = 10;
  std::size_t n_factors = 1;
  double factor_loading_scale = 0.01;
  double treated_loading_shift = 0.0;
  double unit_effect_sd = 0.01;
  double time_effect_sd = 0.01;
  double noise_sd = 0.02;
  bool heavy_tails = false;  // Student-t(3) noise rescaled to sd noise_sd
  double tau = 0.0;
  double trend_divergence = 0.0;
  bool covariates = false;  // adds ln_vol / ln_cap with coefficients below
  double covariate_beta_vol = 0.0;
  double covariate_beta_cap = 0.0;
  std::uint64_t seed = 1;
  Date start = Date{std::chrono::year{2022} / 10 / 2};
  std::string control_label = "CONTROL";
  std::string treated_label = "TREATED";

  void validate() const {
    if (n_co < 1 || n_tr < 1 || t_pre < 1 || t_post < 1) throw InputError("panel spec counts must be at least 1");
    if (!(noise_sd >= 0.0)) throw InputError("panel spec noise_sd must be non-negative");
  }
};

struct GeneratedPanel {
  Panel panel;
  TreatmentAssignment assignment;
  double true_tau = 0.0;
};

inline GeneratedPanel generate_panel(const PanelSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::student_t_distribution<double> t3(3.0);

  const auto n = static_cast<Index>(spec.n_co + spec.n_tr);
  const auto t = static_cast<Index>(spec.t_pre + spec.t_post);
  const auto k = static_cast<Index>(spec.n_factors);

  MatrixXd factors = MatrixXd::Zero(k, t);
  for (Index f = 0; f < k; ++f) {
    double level = 0.0;
    for (Index s = 0; s < t; ++s) factors(f, s) = (level += z(rng));
  }
  VectorXd time_effect(t);
  for (Index s = 0; s < t; ++s) time_effect(s) = spec.time_effect_sd * z(rng);

  GeneratedPanel g;
  g.true_tau = spec.tau;
  Panel& p = g.panel;
  p.outcomes.resize(n, t);
  MatrixXd vol(n, t), cap(n, t);
  for (Index i = 0; i < n; ++i) {
    const bool treated = i >= static_cast<Index>(spec.n_co);
    const std::size_t label = treated ? static_cast<std::size_t>(i) - spec.n_co + 1 : static_cast<std::size_t>(i) + 1;
    char name[32];
    std::snprintf(name, sizeof name, "%s%03zu", treated ? "tr" : "co", label);
    p.units.emplace_back(name);
    p.unit_groups.push_back(treated ? spec.treated_label : spec.control_label);
    if (treated) g.assignment.treated_units.push_back(name);

    const double unit_effect = spec.unit_effect_sd * z(rng);
    VectorXd loading(k);
    for (Index f = 0; f < k; ++f)
      loading(f) = spec.factor_loading_scale * ((treated ? spec.treated_loading_shift : 0.0) + z(rng));
    for (Index s = 0; s < t; ++s) {
      double e = spec.heavy_tails ? t3(rng) / std::sqrt(3.0) : z(rng);
      double y = unit_effect + time_effect(s) + spec.noise_sd * e;
      if (k > 0) y += loading.dot(factors.col(s));
      if (treated) {
        y += spec.trend_divergence * static_cast<double>(s);
        if (s >= static_cast<Index>(spec.t_pre)) y += spec.tau;
      }
      if (spec.covariates) {
        vol(i, s) = 15.0 + z(rng);
        cap(i, s) = 18.0 + z(rng);
        y += spec.covariate_beta_vol * vol(i, s) + spec.covariate_beta_cap * cap(i, s);
      }
      p.outcomes(i, s) = y;
    }
  }
  if (spec.covariates) {
    p.covariates["ln_vol"] = std::move(vol);
    p.covariates["ln_cap"] = std::move(cap);
  }
  for (Index s = 0; s < t; ++s) p.dates.push_back(spec.start + std::chrono::days{s});
  g.assignment.t_pre = spec.t_pre;
  g.assignment.t_post = spec.t_post;
  return g;
}

/// Price records whose log returns reproduce a panel exactly up to rounding:
/// p_0 = 100 on the day before the first panel date, p_t = p_{t-1} exp(r_t).
/// ln(volume) and ln(market cap) equal the panel's covariates when present;
/// otherwise volume and cap are liquid constants.
inline std::vector<RawRecord> panel_to_records(const Panel& panel) {
  std::vector<RawRecord> out;
  const auto t = static_cast<Index>(panel.n_periods());
  for (Index i = 0; i < static_cast<Index>(panel.n_units()); ++i) {
    const auto& id = panel.units[static_cast<std::size_t>(i)];
    const auto& group = panel.unit_groups.empty() ? std::string("ALL") : panel.unit_groups[static_cast<std::size_t>(i)];
    double price = 100.0;
    auto emit = [&](Date d, Index s) {
      RawRecord r;
      r.date = d;
      r.asset_id = id;
      r.group = group;
      r.price = price;
      r.volume = 1e6;
      r.market_cap = 1e8;
      if (s >= 0) {
        if (auto it = panel.covariates.find("ln_vol"); it != panel.covariates.end()) r.volume = std::exp(it->second(i, s));
        if (auto it = panel.covariates.find("ln_cap"); it != panel.covariates.end()) r.market_cap = std::exp(it->second(i, s));
      }
      out.push_back(r);
    };
    emit(panel.dates.front() - std::chrono::days{1}, -1);
    for (Index s = 0; s < t; ++s) {
      price *= std::exp(panel.outcomes(i, s));
      emit(panel.dates[static_cast<std::size_t>(s)], s);
    }
  }
  return out;
}

enum class WeightKind { unit, time };

struct GridOracleResult {
  VectorXd weights;
  double objective = std::numeric_limits<double>::infinity();
};

/// Exhaustive search over the simplex lattice {w : w_j = m_j * h, sum m_j = 1/h}
/// for the unit-weight (ridge zeta^2 T_pre) or time-weight objective. The
/// intercept is solved in closed form at every lattice point.
inline GridOracleResult grid_weight_oracle(const Panel& panel, const TreatmentAssignment& a, double zeta,
                                           double resolution, WeightKind kind) {
  const UnitSplit s = split_units(panel, a, 1);
  if (s.controls.size() > 4 || a.t_pre > 5) throw InputError("grid oracle is limited to N_co <= 4 and T_pre <= 5");
  if (!(resolution > 0.0 && resolution <= 0.1)) throw InputError("grid resolution must lie in (0, 0.1]");
  const auto steps = static_cast<int>(std::lround(1.0 / resolution));
  const auto t_pre = static_cast<Index>(a.t_pre);
  const auto t_post = static_cast<Index>(a.t_post);

  // Rows are the fitted observations, columns the weighted series.
  MatrixXd design;
  VectorXd target;
  double ridge = 0.0;
  if (kind == WeightKind::unit) {
    design.resize(t_pre, static_cast<Index>(s.controls.size()));
    target = VectorXd::Zero(t_pre);
    for (Index tt = 0; tt < t_pre; ++tt) {
      for (std::size_t j = 0; j < s.controls.size(); ++j)
        design(tt, static_cast<Index>(j)) = panel.outcomes(static_cast<Index>(s.controls[j]), tt);
      for (std::size_t i : s.treated) target(tt) += panel.outcomes(static_cast<Index>(i), tt);
      target(tt) /= static_cast<double>(s.treated.size());
    }
    ridge = zeta * zeta * static_cast<double>(t_pre);
  } else {
    design.resize(static_cast<Index>(s.controls.size()), t_pre);
    target.resize(static_cast<Index>(s.controls.size()));
    for (std::size_t j = 0; j < s.controls.size(); ++j) {
      double post = 0.0;
      for (Index tt = 0; tt < t_post; ++tt) post += panel.outcomes(static_cast<Index>(s.controls[j]), t_pre + tt);
      target(static_cast<Index>(j)) = post / static_cast<double>(t_post);
      for (Index tt = 0; tt < t_pre; ++tt) design(static_cast<Index>(j), tt) = panel.outcomes(static_cast<Index>(s.controls[j]), tt);
    }
  }
  const Index dim = design.cols();
  const Index rows = design.rows();
  const double m = static_cast<double>(rows);
  const double h = 1.0 / static_cast<double>(steps);

  GridOracleResult best;
  std::vector<int> counts(static_cast<std::size_t>(dim), 0);
  VectorXd resid = -target;  // A w - b for the current partial lattice point

  // `norm` carries ||w||^2 of the coordinates fixed so far.
  std::function<void(Index, int, double)> recurse = [&](Index j, int remaining, double norm) {
    if (j == dim - 1) {
      counts[static_cast<std::size_t>(j)] = remaining;
      const double wj = remaining * h;
      double sum = 0.0, sq = 0.0;
      for (Index r = 0; r < rows; ++r) {
        const double v = resid(r) + wj * design(r, j);
        sum += v;
        sq += v * v;
      }
      const double obj = (rows > 0 ? sq - sum * sum / m : 0.0) + ridge * (norm + wj * wj);
      if (obj < best.objective) {
        best.objective = obj;
        best.weights.resize(dim);
        for (Index q = 0; q < dim; ++q) best.weights(q) = counts[static_cast<std::size_t>(q)] * h;
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[static_cast<std::size_t>(j)] = c;
      const double wj = c * h;
      resid += wj * design.col(j);
      recurse(j + 1, remaining - c, norm + wj * wj);
      resid -= wj * design.col(j);
    }
  };
  recurse(0, steps, 0.0);
  return best;
}

/// Coefficients from the explicit normal equations X'X b = X'y, solved with a
/// fully pivoted LU factorization.
inline VectorXd dense_ols_oracle(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() != y.size()) throw InputError("design and response lengths differ");
  const MatrixXd xtx = x.transpose() * x;
  Eigen::FullPivLU<MatrixXd> lu(xtx);
  lu.setThreshold(1e-12);
  if (lu.rank() < x.cols()) throw IdentificationError("normal equations are rank deficient");
  return lu.solve(x.transpose() * y);
}

/// Synthetic data for the attention interaction regression.
struct AttentionSpec {
  std::size_t n_units = 20;
  std::size_t n_ai = 8;
  std::size_t n_periods = 120;  // return periods; the level series has one more point
  std::size_t launch_index = 60;  // first post-launch period
  double alpha = 0.0;
  std::array<double, 4> beta{0.0, 0.0, 0.0, 0.09};
  double noise_sd = 0.05;
  bool heteroskedastic = false;
  std::uint64_t seed = 1;
  Date start = Date{std::chrono::year{2022} / 10 / 1};
  std::string term = "AI";
};

struct GeneratedAttention {
  Panel panel;
  AttentionSeries levels;  // integer 0-100 index including the base day
  AttentionSeries delta;
  std::vector<bool> ai_flags;
  Date launch_date;
};

inline GeneratedAttention generate_attention(const AttentionSpec& spec) {
  if (spec.n_ai == 0 || spec.n_ai >= spec.n_units) throw InputError("attention spec needs AI and non-AI units");
  if (spec.launch_index == 0 || spec.launch_index >= spec.n_periods)
    throw InputError("attention spec launch index must be inside the sample");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  GeneratedAttention g;
  g.levels.term = g.delta.term = spec.term;

  double level = 50.0;
  for (std::size_t k = 0; k <= spec.n_periods; ++k) {
    if (k > 0) level = std::clamp(std::round(level + 4.0 * z(rng)), 0.0, 100.0);
    g.levels.dates.push_back(spec.start + std::chrono::days{static_cast<int>(k)});
    g.levels.values.push_back(level);
  }
  g.delta = trends_delta(g.levels);
  g.launch_date = g.delta.dates[spec.launch_index];

  const auto n = static_cast<Index>(spec.n_units);
  const auto t = static_cast<Index>(spec.n_periods);
  Panel& p = g.panel;
  p.dates = g.delta.dates;
  p.outcomes.resize(n, t);
  for (Index i = 0; i < n; ++i) {
    const bool ai = i >= n - static_cast<Index>(spec.n_ai);
    g.ai_flags.push_back(ai);
    char name[32];
    std::snprintf(name, sizeof name, "%s%03d", ai ? "ai" : "na", static_cast<int>(i + 1));
    p.units.emplace_back(name);
    p.unit_groups.push_back(ai ? "AI" : "NONAI");
    for (Index s = 0; s < t; ++s) {
      const double dg = g.delta.values[static_cast<std::size_t>(s)];
      const int cell = (static_cast<std::size_t>(s) < spec.launch_index ? 0 : 2) + (ai ? 1 : 0);
      const double sd = spec.heteroskedastic ? spec.noise_sd * (0.5 + std::abs(dg) / 4.0) : spec.noise_sd;
      p.outcomes(i, s) = spec.alpha + spec.beta[static_cast<std::size_t>(cell)] * dg + sd * z(rng);
    }
  }
  return g;
}

}  // namespace sdidkit
