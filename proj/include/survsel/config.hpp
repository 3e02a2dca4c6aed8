#pragma once

// Flat, typed key = value run configuration.
//
//   # comment
//   scenarios = data/CSP-2010, data/QBF-2011
//   selectors = r2s_par10, sbs
//   seed = 1
//   forest.n_trees = 100
//
// Every key may be overridden from the environment as SURVSEL_<KEY> with
// dots replaced by underscores and letters upper-cased
// (forest.n_trees -> SURVSEL_FOREST_N_TREES).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "survsel/censoring.hpp"
#include "survsel/errors.hpp"
#include "survsel/forest.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/selectors.hpp"
#include "survsel/synthetic.hpp"

namespace survsel {

struct RunConfig {
  std::vector<std::string> scenarios;
  std::vector<SelectorKind> selectors{SelectorKind::R2SPAR10};
  /// Shared settings; `kind` is filled per selector by selector_config().
  SelectorConfig selector;
  std::size_t folds = 10;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  std::string log_level = "warn";
  SyntheticSpec synth;
  /// Effective key/value pairs, in key order, for the run manifest.
  std::map<std::string, std::string> echo;

  SelectorConfig selector_config(SelectorKind kind) const {
    SelectorConfig c = selector;
    c.kind = kind;
    return c;
  }

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("field 'seed': required (set it in the config file or pass --seed)");
    return *seed;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    auto item = trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

[[noreturn]] inline void fail(const std::string& key, const std::string& what, const std::string& value) {
  throw ConfigError("field '" + key + "': " + what + ", got '" + value + "'");
}

inline double as_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (v == "inf") return std::numeric_limits<double>::infinity();
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) fail(key, "expected a number", v);
  return out;
}

inline std::uint64_t as_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) fail(key, "expected a non-negative integer", v);
  return out;
}

inline bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected true or false", v);
}

/// point:V | two_point:V,P,ALT | lognormal:MU,SIGMA | weibull:SHAPE,SCALE
inline RuntimeDistribution as_distribution(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) fail(key, "expected <kind>:<params>", v);
  const std::string kind = trim(v.substr(0, colon));
  std::vector<double> p;
  for (const auto& s : split(v.substr(colon + 1), ',')) p.push_back(as_real(key, s));
  auto need = [&](std::size_t n) {
    if (p.size() != n) fail(key, kind + " takes " + std::to_string(n) + " parameter(s)", v);
  };
  if (kind == "point") {
    need(1);
    return RuntimeDistribution::point(p[0]);
  }
  if (kind == "two_point") {
    need(3);
    return RuntimeDistribution::two_point(p[0], p[1], p[2]);
  }
  if (kind == "lognormal") {
    need(2);
    return RuntimeDistribution::log_normal(p[0], p[1]);
  }
  if (kind == "weibull") {
    need(2);
    return RuntimeDistribution::weibull(p[0], p[1]);
  }
  fail(key, "unknown distribution kind", v);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline void forest_fields(std::map<std::string, Setter>& f, const std::string& prefix,
                          ForestParams SelectorConfig::*member) {
  f[prefix + ".n_trees"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).n_trees = as_count(k, v);
  };
  f[prefix + ".max_features"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).max_features = as_real(k, v);
  };
  f[prefix + ".min_samples_leaf"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).min_samples_leaf = as_count(k, v);
  };
  f[prefix + ".min_uncensored_leaf"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).min_uncensored_leaf = as_count(k, v);
  };
  f[prefix + ".max_depth"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).max_depth = as_count(k, v);
  };
  f[prefix + ".bootstrap"] = [member](RunConfig& c, const auto& k, const auto& v) {
    (c.selector.*member).bootstrap = as_bool(k, v);
  };
}

inline const std::map<std::string, Setter>& fields() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> f;
    f["scenarios"] = [](RunConfig& c, const auto&, const auto& v) { c.scenarios = split(v, ','); };
    f["selectors"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.selectors.clear();
      for (const auto& s : split(v, ',')) {
        try {
          c.selectors.push_back(parse_selector_kind(s));
        } catch (const ArgumentError&) {
          fail(k, "unknown selector", s);
        }
      }
      if (c.selectors.empty()) fail(k, "expected at least one selector", v);
    };
    f["imputation"] = [](RunConfig& c, const auto& k, const auto& v) {
      try {
        c.selector.imputation = parse_imputation(v);
      } catch (const ArgumentError&) {
        fail(k, "expected ignore, runtime, par10 or schmee_hahn", v);
      }
    };
    f["loss"] = [](RunConfig& c, const auto& k, const auto& v) {
      try {
        c.selector.loss = parse_loss(v);
      } catch (const ArgumentError& e) {
        fail(k, e.what(), v);
      }
    };
    f["transform"] = [](RunConfig& c, const auto& k, const auto& v) {
      if (v == "product_limit") c.selector.transform = SurvivalTransform::ProductLimit;
      else if (v == "exponential") c.selector.transform = SurvivalTransform::Exponential;
      else fail(k, "expected product_limit or exponential", v);
    };
    f["folds"] = [](RunConfig& c, const auto& k, const auto& v) { c.folds = as_count(k, v); };
    f["seed"] = [](RunConfig& c, const auto& k, const auto& v) { c.seed = as_count(k, v); };
    f["jobs"] = [](RunConfig& c, const auto& k, const auto& v) {
      const auto n = as_count(k, v);
      if (n < 1 || n > 1024) fail(k, "expected an integer in [1, 1024]", v);
      c.jobs = static_cast<int>(n);
    };
    f["out"] = [](RunConfig& c, const auto&, const auto& v) { c.out = v; };
    f["log_level"] = [](RunConfig& c, const auto& k, const auto& v) {
      if (v != "debug" && v != "info" && v != "warn" && v != "error") fail(k, "expected debug, info, warn or error", v);
      c.log_level = v;
    };
    forest_fields(f, "forest", &SelectorConfig::forest);
    forest_fields(f, "survival", &SelectorConfig::survival_forest);
    f["sunny.k"] = [](RunConfig& c, const auto& k, const auto& v) { c.selector.sunny_k = as_count(k, v); };
    f["isac.max_clusters"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.selector.isac_max_clusters = as_count(k, v);
    };
    f["tuning.n_evaluations"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.selector.tuning.n_evaluations = as_count(k, v);
    };
    f["tuning.validation_fraction"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.selector.tuning.inner_validation_fraction = as_real(k, v);
    };
    f["synth.name"] = [](RunConfig& c, const auto&, const auto& v) { c.synth.name = v; };
    f["synth.algorithms"] = [](RunConfig& c, const auto&, const auto& v) { c.synth.algorithms = split(v, ','); };
    f["synth.distributions"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.synth.distributions.clear();
      for (const auto& d : split(v, ';')) c.synth.distributions.push_back(as_distribution(k, d));
    };
    f["synth.links"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.synth.links.clear();
      for (const auto& d : split(v, ',')) c.synth.links.push_back(as_real(k, d));
    };
    f["synth.n_instances"] = [](RunConfig& c, const auto& k, const auto& v) { c.synth.n_instances = as_count(k, v); };
    f["synth.features"] = [](RunConfig& c, const auto& k, const auto& v) {
      if (v == "constant") c.synth.feature_model = FeatureModel::ConstantNoise;
      else if (v == "linked") c.synth.feature_model = FeatureModel::Linked;
      else fail(k, "expected constant or linked", v);
    };
    f["synth.n_noise"] = [](RunConfig& c, const auto& k, const auto& v) { c.synth.n_noise = as_count(k, v); };
    f["synth.feature_cost"] = [](RunConfig& c, const auto& k, const auto& v) { c.synth.feature_cost = as_real(k, v); };
    f["synth.cutoff"] = [](RunConfig& c, const auto& k, const auto& v) { c.synth.cutoff = as_real(k, v); };
    return f;
  }();
  return table;
}

inline std::string env_name(const std::string& key) {
  std::string out = "SURVSEL_";
  for (char ch : key) out.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return out;
}

}  // namespace config_detail

/// Keys accepted in config files.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : config_detail::fields()) out.push_back(k);
  return out;
}

/// Applies one key/value pair; `origin` prefixes error messages.
inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value,
                               const std::string& origin = "") {
  const auto& f = config_detail::fields();
  const auto it = f.find(key);
  const std::string where = origin.empty() ? "" : origin + ": ";
  if (it == f.end()) throw ConfigError(where + "unknown field '" + key + "'");
  try {
    it->second(c, key, value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.what());
  }
  c.echo[key] = value;
}

/// Parses config text; later lines override earlier ones.
inline void parse_config(RunConfig& c, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = config_detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const std::string origin = source + ":" + std::to_string(line_no);
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected 'key = value'");
    apply_config_value(c, config_detail::trim(text.substr(0, eq)), config_detail::trim(text.substr(eq + 1)), origin);
  }
}

inline RunConfig load_config(const std::string& path) {
  RunConfig c;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  parse_config(c, in, path);
  return c;
}

/// Applies SURVSEL_* environment overrides for every known key.
inline void apply_env_overrides(RunConfig& c) {
  for (const auto& key : config_keys()) {
    const std::string name = config_detail::env_name(key);
    if (const char* v = std::getenv(name.c_str())) apply_config_value(c, key, config_detail::trim(v), name);
  }
}

}  // namespace survsel
