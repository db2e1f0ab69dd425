#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdidkit/date.hpp"
#include "sdidkit/error.hpp"
#include "sdidkit/io.hpp"

namespace sdidkit {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Later assignments (including command-line overrides) replace earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "config") {
    KeyValueConfig c;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      const std::string t = io::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw InputError(source + ": line " + std::to_string(n) + " is not of the form key = value");
      c.set(io::trim(t.substr(0, eq)), io::trim(t.substr(eq + 1)));
    }
    return c;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback = {}) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(get(key), &used);
      if (used != get(key).size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw InputError("config key '" + key + "': '" + get(key) + "' is not a number");
    }
  }

  std::uint64_t get_count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw InputError("config key '" + key + "': '" + s + "' is not a non-negative integer");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InputError("config key '" + key + "': '" + s + "' is not a boolean");
  }

 private:
  std::map<std::string, std::string> values_;
};

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = io::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// One estimation model: treated basket, control basket, covariate names.
struct ModelSpec {
  std::string treated_group;
  std::string control_group;
  std::vector<std::string> covariates;
};

/// Covariate names accept the table spellings ln(vol) / ln(cap).
inline std::string canonical_covariate(const std::string& name) {
  if (name == "ln(vol)" || name == "vol" || name == "volume") return "ln_vol";
  if (name == "ln(cap)" || name == "cap" || name == "market_cap") return "ln_cap";
  return name;
}

/// `-` (none) or a list joined by ',' or '&'.
inline std::vector<std::string> parse_covariate_set(const std::string& text) {
  std::vector<std::string> out;
  std::string normalized = text;
  for (char& c : normalized)
    if (c == '&') c = ',';
  for (const auto& item : split_list(normalized, ','))
    if (item != "-" && item != "none") out.push_back(canonical_covariate(item));
  return out;
}

inline std::string covariate_label(const std::vector<std::string>& covs) {
  if (covs.empty()) return "-";
  std::string s;
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (k) s += " & ";
    s += covs[k] == "ln_vol" ? "ln(vol)" : covs[k] == "ln_cap" ? "ln(cap)" : covs[k];
  }
  return s;
}

/// Typed view of the run configuration. Defaults encode the study window
/// (October 1, 2022 to January 31, 2023) and the November 30, 2022 launch.
struct RunConfig {
  std::string prices;
  std::string trends;
  std::string news;
  std::string treated_group = "GAI";
  std::string control_group = "GCKO";
  std::vector<ModelSpec> models;
  Date treatment_date = Date{std::chrono::year{2022} / 11 / 30};
  bool treated_on_date = true;
  std::vector<int> windows{1, 2};
  double liquidity_floor = 20000.0;
  bool liquidity_average = false;
  std::size_t boot = 500;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::string out = "out";
  bool cr1 = false;
  bool t_interval = false;
  bool event_study_pretrends = false;
  bool uniform_weights = false;
  std::optional<double> zeta_scaling;
  bool per_replicate_covariates = false;
  std::vector<std::string> describe_groups;
  // attention
  std::vector<std::string> terms;
  std::string ai_group = "GAI";
  std::vector<std::string> universe;
  Date launch_date = Date{std::chrono::year{2022} / 11 / 30};
  std::string attention_source = "trends";
  bool news_level = false;
  bool percent_delta = false;
  bool unit_fixed_effects = false;

  static RunConfig from(const KeyValueConfig& kv) {
    RunConfig c;
    c.prices = kv.get("prices");
    c.trends = kv.get("trends");
    c.news = kv.get("news");
    c.treated_group = kv.get("treated_group", c.treated_group);
    c.control_group = kv.get("control_group", c.control_group);
    if (kv.has("treatment_date")) c.treatment_date = parse_date(kv.get("treatment_date"));
    const std::string from = kv.get("treated_from", "on");
    if (from != "on" && from != "after") throw InputError("treated_from must be 'on' or 'after'");
    c.treated_on_date = from == "on";
    if (kv.has("windows")) {
      c.windows.clear();
      for (const auto& w : split_list(kv.get("windows"), ',')) {
        int m = 0;
        auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), m);
        if (ec != std::errc{} || ptr != w.data() + w.size() || m < 1)
          throw InputError("windows: '" + w + "' is not a positive month count");
        c.windows.push_back(m);
      }
      if (c.windows.empty()) throw InputError("windows: at least one window is required");
    }
    std::vector<std::vector<std::string>> cov_sets;
    for (const auto& set : split_list(kv.get("covariates", "-"), ';')) cov_sets.push_back(parse_covariate_set(set));
    if (cov_sets.empty()) cov_sets.emplace_back();
    if (kv.has("models")) {
      // treated|control|covariates; ...
      for (const auto& m : split_list(kv.get("models"), ';')) {
        auto parts = split_list(m, '|');
        if (parts.size() < 2 || parts.size() > 3) throw InputError("models: '" + m + "' is not treated|control[|covariates]");
        c.models.push_back({parts[0], parts[1], parts.size() == 3 ? parse_covariate_set(parts[2]) : std::vector<std::string>{}});
      }
    } else {
      for (auto& covs : cov_sets) c.models.push_back({c.treated_group, c.control_group, covs});
    }
    c.liquidity_floor = kv.get_number("liquidity_floor", c.liquidity_floor);
    const std::string rule = kv.get("liquidity_rule", "any");
    if (rule != "any" && rule != "average") throw InputError("liquidity_rule must be 'any' or 'average'");
    c.liquidity_average = rule == "average";
    c.boot = kv.get_count("boot", c.boot);
    c.seed = kv.get_count("seed", c.seed);
    c.threads = static_cast<unsigned>(kv.get_count("threads", c.threads));
    c.out = kv.get("out", c.out);
    const std::string cluster = kv.get("cluster", "cr2");
    if (cluster != "cr1" && cluster != "cr2") throw InputError("cluster must be 'cr1' or 'cr2'");
    c.cr1 = cluster == "cr1";
    const std::string ci = kv.get("ci", "normal");
    if (ci != "normal" && ci != "t") throw InputError("ci must be 'normal' or 't'");
    c.t_interval = ci == "t";
    const std::string pt = kv.get("pretrend_test", "linear");
    if (pt != "linear" && pt != "event") throw InputError("pretrend_test must be 'linear' or 'event'");
    c.event_study_pretrends = pt == "event";
    c.uniform_weights = kv.get_bool("uniform_weights", false);
    if (kv.has("zeta_scaling")) c.zeta_scaling = kv.get_number("zeta_scaling", 1.0);
    c.per_replicate_covariates = kv.get_bool("per_replicate_covariates", false);
    c.describe_groups = split_list(kv.get("groups"), ',');
    c.terms = split_list(kv.get("terms"), ',');
    c.ai_group = kv.get("ai_group", c.treated_group);
    c.universe = split_list(kv.get("universe"), ',');
    if (c.universe.empty()) c.universe = {c.control_group, c.ai_group};
    if (kv.has("launch_date")) c.launch_date = parse_date(kv.get("launch_date"));
    else c.launch_date = c.treatment_date;
    c.attention_source = kv.get("attention_source", "trends");
    if (c.attention_source != "trends" && c.attention_source != "news")
      throw InputError("attention_source must be 'trends' or 'news'");
    const std::string mode = kv.get("news_mode", "change");
    if (mode != "change" && mode != "level") throw InputError("news_mode must be 'change' or 'level'");
    c.news_level = mode == "level";
    const std::string delta = kv.get("delta", "difference");
    if (delta != "difference" && delta != "percent") throw InputError("delta must be 'difference' or 'percent'");
    c.percent_delta = delta == "percent";
    c.unit_fixed_effects = kv.get_bool("unit_fixed_effects", false);
    return c;
  }
};

}  // namespace sdidkit
