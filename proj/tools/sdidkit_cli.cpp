// Command-line driver: describe, did, sdid, attention, simulate.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdidkit/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string treatment_date;
  std::vector<int> windows;
  std::string boot;
  std::string seed;
  std::string covariates;
  std::string liquidity_floor;
  std::string out;
  std::string threads;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "key = value configuration file");
  sub->add_option("--treatment-date", o.treatment_date, "first treated date (YYYY-MM-DD)");
  sub->add_option("--window", o.windows, "post-treatment window lengths in months");
  sub->add_option("--boot", o.boot, "bootstrap replications");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--covariates", o.covariates, "covariate sets, e.g. '-;ln(vol);ln(vol)&ln(cap)'");
  sub->add_option("--liquidity-floor", o.liquidity_floor, "minimum daily volume");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--threads", o.threads, "bootstrap worker threads");
  sub->add_option("--set", o.sets, "extra key=value overrides");
  sub->add_flag("-q,--quiet", o.quiet, "do not echo the text report");
}

sdidkit::KeyValueConfig load(const Overrides& o) {
  sdidkit::KeyValueConfig kv = o.config.empty() ? sdidkit::KeyValueConfig{} : sdidkit::KeyValueConfig::parse_file(o.config);
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) kv.set(key, v);
  };
  put("treatment_date", o.treatment_date);
  put("boot", o.boot);
  put("seed", o.seed);
  put("covariates", o.covariates);
  put("liquidity_floor", o.liquidity_floor);
  put("out", o.out);
  put("threads", o.threads);
  if (!o.windows.empty()) {
    std::string w;
    for (int m : o.windows) w += (w.empty() ? "" : ",") + std::to_string(m);
    kv.set("windows", w);
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw sdidkit::InputError("--set expects key=value, got '" + s + "'");
    kv.set(sdidkit::io::trim(s.substr(0, eq)), sdidkit::io::trim(s.substr(eq + 1)));
  }
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel causal inference: DID, synthetic DID and attention regressions"};
  app.require_subcommand(1);
  Overrides o;
  auto* describe = app.add_subcommand("describe", "descriptive statistics of log returns by group");
  auto* did = app.add_subcommand("did", "two-way fixed-effects difference-in-differences");
  auto* sdid = app.add_subcommand("sdid", "synthetic difference-in-differences");
  auto* attention = app.add_subcommand("attention", "returns on attention changes by launch period and group");
  auto* simulate = app.add_subcommand("simulate", "write a synthetic data set");
  for (auto* s : {describe, did, sdid, attention, simulate}) add_common(s, o);
  CLI11_PARSE(app, argc, argv);

  try {
    const sdidkit::KeyValueConfig kv = load(o);
    const sdidkit::RunConfig cfg = sdidkit::RunConfig::from(kv);
    sdidkit::CommandOutput out;
    if (describe->parsed()) out = sdidkit::cmd_describe(cfg);
    else if (did->parsed()) out = sdidkit::cmd_estimate(cfg, sdidkit::Estimator::did);
    else if (sdid->parsed()) out = sdidkit::cmd_estimate(cfg, sdidkit::Estimator::sdid);
    else if (attention->parsed()) out = sdidkit::cmd_attention(cfg);
    else out = sdidkit::cmd_simulate(kv);
    sdidkit::write_outputs(out, cfg.out);
    if (!o.quiet) std::cout << out.text;
    if (out.exit_code != sdidkit::ExitCode::ok) {
      std::cerr << "error: some rows failed (see " << cfg.out << "/report.json)\n";
      if (out.report.contains("failures"))
        for (const auto& f : out.report["failures"])
          std::cerr << "  " << (f.contains("model") ? f["model"] : f["term"]).get<std::string>() << ": "
                    << f["error"].get<std::string>() << "\n";
    }
    return static_cast<int>(out.exit_code);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(sdidkit::exit_code_for(e));
  }
}
