#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdidkit/attention.hpp"
#include "sdidkit/config.hpp"
#include "sdidkit/did.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/io.hpp"
#include "sdidkit/panel.hpp"
#include "sdidkit/sdid.hpp"
#include "sdidkit/stats.hpp"
#include "sdidkit/svg.hpp"
#include "sdidkit/synthgen.hpp"

namespace sdidkit {

using Json = nlohmann::ordered_json;

/// Everything a subcommand produces. Nothing touches the filesystem until
/// write_outputs is called, so reports can be compared in memory.
struct CommandOutput {
  Json report;
  std::string text;
  std::map<std::string, std::string> files;  // extra artifacts by file name
  ExitCode exit_code = ExitCode::ok;
};

namespace detail {

inline Json balance_json(const BalanceReport& r) {
  Json dropped = Json::array();
  for (const auto& d : r.dropped) dropped.push_back({{"asset_id", d.asset_id}, {"reason", d.reason}});
  return Json{{"dropped", dropped}, {"n_units", r.n_units}, {"n_periods", r.n_periods}};
}

inline BuildOptions build_options(const RunConfig& c) {
  return {c.liquidity_floor, c.liquidity_average ? LiquidityRule::average_day : LiquidityRule::any_day};
}

inline std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// *, **, *** for two-sided normal p < 0.10, 0.05, 0.01.
inline std::string stars(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(estimate)) return "";
  const double p = 2.0 * (1.0 - boost::math::cdf(boost::math::normal_distribution<double>{}, std::abs(estimate / se)));
  return p < 0.01 ? "***" : p < 0.05 ? "**" : p < 0.10 ? "*" : "";
}

inline std::string stars_p(double p) { return p < 0.01 ? "***" : p < 0.05 ? "**" : p < 0.10 ? "*" : ""; }

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - r[c].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

inline ExitCode worse(ExitCode a, ExitCode b) {
  auto rank = [](ExitCode e) {
    switch (e) {
      case ExitCode::non_convergence: return 3;
      case ExitCode::identification: return 2;
      case ExitCode::input: return 1;
      default: return 0;
    }
  };
  return rank(b) > rank(a) ? b : a;
}

inline std::string window_label(int months) { return "0-" + std::to_string(months) + "m"; }

}  // namespace detail

/// Group-level descriptive statistics of log returns, one row per group.
inline CommandOutput cmd_describe(const RunConfig& cfg) {
  if (cfg.prices.empty()) throw InputError("describe needs a price file (key 'prices')");
  const auto records = io::read_price_file(cfg.prices);
  std::vector<std::string> groups = cfg.describe_groups;
  if (groups.empty())
    for (const auto& r : records)
      if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);

  CommandOutput out;
  Json rows = Json::array();
  Json balance = Json::object();
  std::vector<std::vector<std::string>> table{{"Ticker", "Obs", "N", "Mean", "SD", "Min", "Max", "Skew", "JB"}};
  for (const auto& g : groups) {
    if (std::none_of(records.begin(), records.end(), [&](const RawRecord& r) { return r.group == g; }))
      throw InputError("group '" + g + "' has no records");
    const BuildResult built = build_group_panel(records, {g}, detail::build_options(cfg));
    if (built.panel.n_units() == 0) throw InputError("group '" + g + "' is empty after filtering");
    const StatsRow s = descriptive_stats(built.panel, g);
    rows.push_back({{"group", g},
                    {"obs", s.obs},
                    {"n_assets", s.n_assets},
                    {"mean", s.mean},
                    {"sd", s.sd},
                    {"min", s.min},
                    {"max", s.max},
                    {"skew", s.skew},
                    {"jb_stat", s.jb.statistic},
                    {"jb_p", s.jb.p_value},
                    {"jb_degenerate", s.jb.degenerate}});
    balance[g] = detail::balance_json(built.report);
    table.push_back({g, std::to_string(s.obs), std::to_string(s.n_assets), detail::fixed(s.mean, 4),
                     detail::fixed(s.sd, 3), detail::fixed(s.min, 2), detail::fixed(s.max, 2), detail::fixed(s.skew, 2),
                     s.jb.degenerate ? "NA" : detail::fixed(s.jb.p_value, 2) + detail::stars_p(s.jb.p_value)});
  }
  out.report = Json{{"command", "describe"}, {"rows", rows}, {"balance", balance}};
  out.text = "Descriptive statistics for log returns\n" + detail::render_table(table);
  return out;
}

namespace detail {

struct FigureData {
  bool set = false;
  std::vector<Date> dates;
  VectorXd treated;
  VectorXd control;
  std::size_t t_pre = 0;
  std::vector<std::string> control_units;
  VectorXd omega;
  VectorXd lambda;
};

inline void emit_figures(const FigureData& f, CommandOutput& out) {
  if (!f.set) return;
  std::ostringstream trends, units, times;
  trends << "date,treated_mean,control_weighted_mean,treated_period\n";
  for (std::size_t t = 0; t < f.dates.size(); ++t)
    trends << format_date(f.dates[t]) << ',' << io::format_number(f.treated(static_cast<Index>(t))) << ','
           << io::format_number(f.control(static_cast<Index>(t))) << ',' << (t >= f.t_pre ? 1 : 0) << '\n';
  units << "unit_id,omega\n";
  for (std::size_t j = 0; j < f.control_units.size(); ++j)
    units << f.control_units[j] << ',' << io::format_number(f.omega(static_cast<Index>(j))) << '\n';
  times << "date,lambda\n";
  for (std::size_t t = 0; t < f.t_pre; ++t)
    times << format_date(f.dates[t]) << ',' << io::format_number(f.lambda(static_cast<Index>(t))) << '\n';
  out.files["fig_trends.csv"] = trends.str();
  out.files["fig_weights_units.csv"] = units.str();
  out.files["fig_weights_time.csv"] = times.str();
  std::vector<double> tr(f.treated.data(), f.treated.data() + f.treated.size());
  std::vector<double> co(f.control.data(), f.control.data() + f.control.size());
  out.files["fig_trends.svg"] = svg::line_chart({{"treated", tr}, {"control (weighted)", co}}, f.t_pre,
                                                 "Outcome trends");
}

}  // namespace detail

/// DID or SDID estimates, one row per model with one ATT column pair per window.
inline CommandOutput cmd_estimate(const RunConfig& cfg, Estimator estimator) {
  if (cfg.prices.empty()) throw InputError("estimation needs a price file (key 'prices')");
  if (estimator == Estimator::sdid && !cfg.uniform_weights && cfg.boot > 0 && cfg.boot < 2)
    throw InputError("SDID inference needs boot >= 2");
  const auto records = io::read_price_file(cfg.prices);
  std::vector<int> windows = cfg.windows;
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());

  CommandOutput out;
  Json rows = Json::array();
  Json failures = Json::array();
  Json notes = Json::array();
  Json balance = Json::object();
  detail::FigureData fig;

  std::vector<std::string> header{"Model", "AI Category", "Controls", "Covariates"};
  for (int w : windows)
    header.push_back("ATT (0 to " + std::to_string(w) + (w == 1 ? " Month)" : " Months)"));
  if (estimator == Estimator::did) header.push_back("Parallel Trends");
  std::vector<std::vector<std::string>> table{header};

  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    const ModelSpec& spec = cfg.models[m];
    const std::string model_id = "(" + std::to_string(m + 1) + ")";
    Json row{{"model", model_id},
             {"treated_group", spec.treated_group},
             {"control_group", spec.control_group},
             {"covariates", covariate_label(spec.covariates)}};
    std::vector<std::string> cells{model_id, spec.treated_group, spec.control_group, covariate_label(spec.covariates)};
    try {
      const BuildResult built = build_panel(records, spec.treated_group, spec.control_group, detail::build_options(cfg));
      balance[model_id] = detail::balance_json(built.report);
      for (const auto& w : built.report.warnings) notes.push_back(model_id + ": " + w);
      const Panel& panel = built.panel;
      const TreatmentAssignment full = make_assignment(panel, spec.treated_group, cfg.treatment_date, cfg.treated_on_date);

      for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const int w = windows[wi];
        auto [wp, wa] = event_window(panel, full, w);
        const std::string key = std::to_string(w) + "m";
        AttEstimate est;
        if (estimator == Estimator::did) {
          DidOptions opt;
          opt.cluster_mode = cfg.cr1 ? ClusterMode::cr1 : ClusterMode::cr2;
          opt.t_interval = cfg.t_interval;
          est = twfe_did(wp, wa, spec.covariates, opt);
          if (wi + 1 == windows.size() && !fig.set) {
            const auto tr = outcome_trends(wp, wa, uniform_weights(wp, wa).omega);
            const UnitSplit s = split_units(wp, wa);
            fig = {true, wp.dates, tr.treated, tr.synthetic_control, wa.t_pre, {},
                   uniform_weights(wp, wa).omega, uniform_weights(wp, wa).lambda};
            for (std::size_t j : s.controls) fig.control_units.push_back(wp.units[j]);
          }
        } else {
          SdidOptions opt;
          opt.covariates = spec.covariates;
          opt.uniform = cfg.uniform_weights;
          opt.n_boot = cfg.boot;
          opt.seed = cfg.seed;
          opt.threads = cfg.threads;
          opt.zeta_scaling = cfg.zeta_scaling;
          opt.residualize_per_replicate = cfg.per_replicate_covariates;
          const SdidResult r = sdid_estimate(wp, wa, opt);
          est = r.att;
          for (const auto& n : r.notes) notes.push_back(model_id + " " + detail::window_label(w) + ": " + n);
          row["zeta_" + key] = r.weights.zeta;
          if (wi + 1 == windows.size() && !fig.set) {
            const Panel adjusted = residualize_covariates(wp, spec.covariates);
            const auto tr = outcome_trends(adjusted, wa, r.weights.omega);
            const UnitSplit s = split_units(wp, wa);
            fig = {true, wp.dates, tr.treated, tr.synthetic_control, wa.t_pre, {}, r.weights.omega, r.weights.lambda};
            for (std::size_t j : s.controls) fig.control_units.push_back(wp.units[j]);
          }
        }
        row["att_" + key] = est.tau_hat;
        row["se_" + key] = est.se;
        row["ci_low_" + key] = est.ci_low;
        row["ci_high_" + key] = est.ci_high;
        row["t_post_" + key] = wa.t_post;
        cells.push_back(detail::fixed(est.tau_hat, 5) + detail::stars(est.tau_hat, est.se) + " (" +
                        detail::fixed(est.se, 5) + ")");
      }
      if (estimator == Estimator::did) {
        TrendTestOptions topt;
        topt.form = cfg.event_study_pretrends ? TrendTestForm::event_study : TrendTestForm::linear_trend;
        topt.cluster_mode = cfg.cr1 ? ClusterMode::cr1 : ClusterMode::cr2;
        const FTestResult f = parallel_trends_test(panel, full, topt);
        row["pt_pvalue"] = f.p;
        row["pt_f"] = f.f_stat;
        cells.push_back("[" + detail::fixed(f.p, 5) + "]");
      } else {
        row["n_boot"] = cfg.uniform_weights ? 0 : cfg.boot;
      }
      row["t_pre"] = full.t_pre;
      row["n_treated"] = full.treated_units.size();
      row["n_controls"] = panel.n_units() - full.treated_units.size();
      rows.push_back(row);
      table.push_back(cells);
    } catch (const std::exception& e) {
      const ExitCode code = exit_code_for(e);
      out.exit_code = detail::worse(out.exit_code, code);
      failures.push_back({{"model", model_id}, {"exit_code", static_cast<int>(code)}, {"error", e.what()}});
    }
  }

  out.report = Json{{"command", estimator == Estimator::did ? "did" : "sdid"},
                    {"estimator", to_string(estimator)},
                    {"treatment_date", format_date(cfg.treatment_date)},
                    {"windows", windows},
                    {"rows", rows},
                    {"failures", failures},
                    {"notes", notes},
                    {"balance", balance}};
  std::string title = estimator == Estimator::did ? "DID estimation results for returns\n"
                                                  : "SDID estimation results for returns\n";
  out.text = title + detail::render_table(table);
  if (estimator == Estimator::did)
    out.text += "Cluster-robust standard errors (" + std::string(cfg.cr1 ? "CR1" : "CR2") +
                ") in parentheses; parallel-trends F-test p-values in brackets.\n";
  else
    out.text += "Standard errors from " + std::to_string(cfg.boot) + " bootstrap replications in parentheses.\n";
  for (const auto& f : failures) out.text += "FAILED " + f["model"].get<std::string>() + ": " + f["error"].get<std::string>() + "\n";
  detail::emit_figures(fig, out);
  return out;
}

/// Interaction regressions of returns on attention changes, one row per term.
inline CommandOutput cmd_attention(const RunConfig& cfg) {
  if (cfg.prices.empty()) throw InputError("attention needs a price file (key 'prices')");
  const bool news = cfg.attention_source == "news";
  if (news ? cfg.news.empty() : cfg.trends.empty())
    throw InputError(std::string("attention needs a ") + (news ? "news" : "trends") + " file");
  const auto records = io::read_price_file(cfg.prices);
  const BuildResult built = build_group_panel(records, cfg.universe, detail::build_options(cfg));
  const Panel& panel = built.panel;
  std::vector<bool> ai_flags;
  for (const auto& g : panel.unit_groups) ai_flags.push_back(g == cfg.ai_group);

  std::map<std::string, AttentionSeries> series;
  if (news) {
    std::ifstream in(cfg.news);
    if (!in) throw InputError("cannot open news file '" + cfg.news + "'");
    for (auto& [topic, recs] : io::read_news_csv(in, cfg.news)) series.emplace(topic, institutional_index(recs));
  } else {
    std::ifstream in(cfg.trends);
    if (!in) throw InputError("cannot open trends file '" + cfg.trends + "'");
    series = io::read_trends_csv(in, cfg.trends);
  }
  std::vector<std::string> terms = cfg.terms;
  if (terms.empty())
    for (const auto& [t, s] : series) terms.push_back(t);

  CommandOutput out;
  Json rows = Json::array();
  Json failures = Json::array();
  Json notes = Json::array();
  std::vector<std::vector<std::string>> table{{"Search Term", "Obs.", "alpha", "beta_1", "beta_2", "beta_3", "beta_4",
                                               "[beta_1=beta_2]", "[beta_3=beta_4]", "[beta_1=beta_3]",
                                               "[beta_2=beta_4]", "Adj. R2"}};
  for (const auto& term : terms) {
    try {
      auto it = series.find(term);
      if (it == series.end())
        throw InputError("term '" + term + "' is not in the " + std::string(news ? "news" : "trends") + " file");
      if (it->second.degenerate) notes.push_back(term + ": institutional index is constant; set to 0");
      AttentionSeries regressor =
          news && cfg.news_level ? it->second
                                 : trends_delta(it->second, cfg.percent_delta ? DeltaKind::percent_change : DeltaKind::difference);
      InteractionOptions opt;
      opt.unit_fixed_effects = cfg.unit_fixed_effects;
      const auto r = interaction_regression(panel, regressor, ai_flags, cfg.launch_date, opt);
      Json row{{"term", term}, {"source", cfg.attention_source}, {"obs", r.n_obs}, {"alpha", r.alpha},
               {"se_alpha", r.robust_se[0]}};
      for (std::size_t k = 0; k < 4; ++k) {
        row[kSlopeLabels[k]] = r.beta[k];
        row[std::string("se_") + kSlopeLabels[k]] = r.robust_se[k + 1];
      }
      row["wald_p"] = Json{{"b1=b2", r.wald_p.at("b1=b2")},
                           {"b3=b4", r.wald_p.at("b3=b4")},
                           {"b1=b3", r.wald_p.at("b1=b3")},
                           {"b2=b4", r.wald_p.at("b2=b4")}};
      row["adj_r2"] = r.adj_r2;
      rows.push_back(row);
      std::vector<std::string> cells{"\"" + term + "\"", std::to_string(r.n_obs),
                                     detail::fixed(r.alpha, 2) + detail::stars(r.alpha, r.robust_se[0]) + " (" +
                                         detail::fixed(r.robust_se[0], 2) + ")"};
      for (std::size_t k = 0; k < 4; ++k)
        cells.push_back(detail::fixed(r.beta[k], 2) + detail::stars(r.beta[k], r.robust_se[k + 1]) + " (" +
                        detail::fixed(r.robust_se[k + 1], 2) + ")");
      for (const char* key : {"b1=b2", "b3=b4", "b1=b3", "b2=b4"}) {
        const double p = r.wald_p.at(key);
        cells.push_back("[" + detail::fixed(p, 2) + "]" + detail::stars_p(p));
      }
      cells.push_back(detail::fixed(r.adj_r2, 2));
      table.push_back(cells);
    } catch (const std::exception& e) {
      const ExitCode code = exit_code_for(e);
      out.exit_code = detail::worse(out.exit_code, code);
      failures.push_back({{"term", term}, {"exit_code", static_cast<int>(code)}, {"error", e.what()}});
    }
  }
  out.report = Json{{"command", "attention"},
                    {"launch_date", format_date(cfg.launch_date)},
                    {"ai_group", cfg.ai_group},
                    {"universe", cfg.universe},
                    {"rows", rows},
                    {"failures", failures},
                    {"notes", notes},
                    {"balance", detail::balance_json(built.report)}};
  out.text = "Response of returns to attention changes (White robust standard errors)\n" +
             detail::render_table(table);
  for (const auto& f : failures) out.text += "FAILED " + f["term"].get<std::string>() + ": " + f["error"].get<std::string>() + "\n";
  return out;
}

/// Synthetic data export: `sim_kind = sdid` writes a block-treatment price file,
/// `sim_kind = attention` a price file plus a trends file with known slopes.
inline CommandOutput cmd_simulate(const KeyValueConfig& kv) {
  CommandOutput out;
  const std::string kind = kv.get("sim_kind", "sdid");
  const auto seed = kv.get_count("seed", 42);
  if (kind == "sdid") {
    PanelSpec spec;
    spec.n_co = kv.get_count("sim_n_co", spec.n_co);
    spec.n_tr = kv.get_count("sim_n_tr", spec.n_tr);
    spec.t_pre = kv.get_count("sim_t_pre", spec.t_pre);
    spec.t_post = kv.get_count("sim_t_post", spec.t_post);
    spec.n_factors = kv.get_count("sim_n_factors", spec.n_factors);
    spec.factor_loading_scale = kv.get_number("sim_loading_scale", spec.factor_loading_scale);
    spec.treated_loading_shift = kv.get_number("sim_loading_shift", spec.treated_loading_shift);
    spec.noise_sd = kv.get_number("sim_noise_sd", spec.noise_sd);
    spec.heavy_tails = kv.get_bool("sim_heavy_tails", spec.heavy_tails);
    spec.tau = kv.get_number("sim_tau", spec.tau);
    spec.trend_divergence = kv.get_number("sim_trend_divergence", spec.trend_divergence);
    spec.covariates = kv.get_bool("sim_covariates", spec.covariates);
    spec.covariate_beta_vol = kv.get_number("sim_beta_vol", spec.covariate_beta_vol);
    spec.covariate_beta_cap = kv.get_number("sim_beta_cap", spec.covariate_beta_cap);
    spec.treated_label = kv.get("treated_group", spec.treated_label);
    spec.control_label = kv.get("control_group", spec.control_label);
    if (kv.has("sim_start")) spec.start = parse_date(kv.get("sim_start"));
    spec.seed = seed;
    const GeneratedPanel g = generate_panel(spec);
    std::ostringstream csv;
    io::write_price_csv(csv, panel_to_records(g.panel));
    out.files["prices.csv"] = csv.str();
    const Date first_treated = g.panel.dates[spec.t_pre];
    out.report = Json{{"command", "simulate"},
                      {"kind", kind},
                      {"seed", seed},
                      {"true_tau", g.true_tau},
                      {"treatment_date", format_date(first_treated)},
                      {"treated_group", spec.treated_label},
                      {"control_group", spec.control_label},
                      {"n_units", g.panel.n_units()},
                      {"n_periods", g.panel.n_periods()},
                      {"t_pre", spec.t_pre},
                      {"t_post", spec.t_post}};
    out.text = "Simulated " + std::to_string(g.panel.n_units()) + " units x " + std::to_string(g.panel.n_periods()) +
               " periods, tau = " + io::format_number(g.true_tau) + ", first treated date " +
               format_date(first_treated) + "\n";
    return out;
  }
  if (kind == "attention") {
    AttentionSpec spec;
    spec.n_units = kv.get_count("sim_n_units", spec.n_units);
    spec.n_ai = kv.get_count("sim_n_ai", spec.n_ai);
    spec.n_periods = kv.get_count("sim_n_periods", spec.n_periods);
    spec.launch_index = kv.get_count("sim_launch_index", spec.launch_index);
    spec.alpha = kv.get_number("sim_alpha", spec.alpha);
    for (std::size_t k = 0; k < 4; ++k)
      spec.beta[k] = kv.get_number("sim_beta" + std::to_string(k + 1), spec.beta[k]);
    spec.noise_sd = kv.get_number("sim_noise_sd", spec.noise_sd);
    spec.term = kv.get("sim_term", spec.term);
    if (kv.has("sim_start")) spec.start = parse_date(kv.get("sim_start"));
    spec.seed = seed;
    const GeneratedAttention g = generate_attention(spec);
    std::ostringstream prices, trends;
    io::write_price_csv(prices, panel_to_records(g.panel));
    io::write_trends_csv(trends, {g.levels});
    out.files["prices.csv"] = prices.str();
    out.files["trends.csv"] = trends.str();
    out.report = Json{{"command", "simulate"},
                      {"kind", kind},
                      {"seed", seed},
                      {"term", spec.term},
                      {"launch_date", format_date(g.launch_date)},
                      {"alpha", spec.alpha},
                      {"beta", spec.beta},
                      {"ai_group", "AI"},
                      {"universe", {"NONAI", "AI"}}};
    out.text = "Simulated attention panel with " + std::to_string(spec.n_units) + " units, launch " +
               format_date(g.launch_date) + "\n";
    return out;
  }
  throw InputError("sim_kind must be 'sdid' or 'attention'");
}

/// Writes report.json, report.txt and every extra artifact into `dir`.
inline void write_outputs(const CommandOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InputError("cannot write '" + (dir / name).string() + "'");
    f << content;
  };
  write("report.json", out.report.dump(2) + "\n");
  write("report.txt", out.text);
  for (const auto& [name, content] : out.files) write(name, content);
}

}  // namespace sdidkit
