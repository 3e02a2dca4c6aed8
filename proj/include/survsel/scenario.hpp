#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "survsel/arff.hpp"
#include "survsel/errors.hpp"
#include "survsel/features.hpp"
#include "survsel/log.hpp"

namespace survsel {

/// Runtime data of an algorithm-selection scenario.
///
/// Runtimes are stored instance-major. A censored run always has runtime equal
/// to the cutoff; an uncensored run lies in (0, cutoff).
struct Scenario {
  std::string name;
  std::vector<std::string> algorithms;
  std::vector<std::string> instances;
  std::vector<std::string> feature_names;
  FeatureMatrix features;
  std::vector<double> feature_costs;
  std::vector<double> runtimes;
  std::vector<std::uint8_t> censored;
  double cutoff = 0.0;
  /// Fold index (1-based) per instance, when the scenario ships a CV split.
  std::optional<std::vector<int>> folds;

  std::size_t n_instances() const { return instances.size(); }
  std::size_t n_algorithms() const { return algorithms.size(); }
  std::size_t n_features() const { return features.cols(); }

  double runtime(std::size_t i, std::size_t a) const { return runtimes[i * algorithms.size() + a]; }
  bool is_censored(std::size_t i, std::size_t a) const { return censored[i * algorithms.size() + a] != 0; }

  /// PAR10 score of the recorded run.
  double par10(std::size_t i, std::size_t a) const { return is_censored(i, a) ? 10.0 * cutoff : runtime(i, a); }

  bool unsolvable(std::size_t i) const {
    for (std::size_t a = 0; a < algorithms.size(); ++a)
      if (!is_censored(i, a)) return false;
    return true;
  }

  /// Throws InvariantError if any structural invariant fails.
  void validate() const {
    const std::size_t n = instances.size(), m = algorithms.size();
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw InvariantError("scenario cutoff must be positive");
    if (features.rows() != n) throw InvariantError("feature rows do not match instances");
    if (feature_costs.size() != n) throw InvariantError("feature costs do not match instances");
    if (runtimes.size() != n * m || censored.size() != n * m) throw InvariantError("runtime matrix has wrong shape");
    for (std::size_t k = 0; k < runtimes.size(); ++k) {
      const double y = runtimes[k];
      if (!(y > 0.0 && y <= cutoff)) throw InvariantError("runtime outside (0, C] in scenario " + name);
      if ((censored[k] != 0) != (y == cutoff)) throw InvariantError("censor flag must hold exactly when y = C");
    }
    if (folds && folds->size() != n) throw InvariantError("fold assignment does not cover every instance");
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// A subset of a scenario's instances (e.g. a training fold).
struct ScenarioView {
  const Scenario* scenario = nullptr;
  std::vector<std::size_t> rows;

  const Scenario& base() const { return *scenario; }
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  static ScenarioView all(const Scenario& s) {
    ScenarioView v{&s, std::vector<std::size_t>(s.n_instances())};
    std::iota(v.rows.begin(), v.rows.end(), std::size_t{0});
    return v;
  }
};

struct ScenarioStats {
  std::size_t n_instances = 0;
  std::size_t n_unsolvable = 0;
  std::size_t n_algorithms = 0;
  std::size_t n_features = 0;
  double cutoff = 0.0;
  double pct_censored = 0.0;
};

inline ScenarioStats compute_stats(const Scenario& s) {
  ScenarioStats st;
  st.n_instances = s.n_instances();
  st.n_algorithms = s.n_algorithms();
  st.n_features = s.n_features();
  st.cutoff = s.cutoff;
  std::size_t censored = 0;
  for (auto c : s.censored) censored += c ? 1 : 0;
  for (std::size_t i = 0; i < s.n_instances(); ++i) st.n_unsolvable += s.unsolvable(i) ? 1 : 0;
  if (!s.censored.empty()) st.pct_censored = 100.0 * static_cast<double>(censored) / static_cast<double>(s.censored.size());
  return st;
}

/// Fold index (1..k) per instance: the scenario's own split when present,
/// otherwise a seeded shuffle dealt round-robin into k near-equal folds.
inline std::vector<int> make_folds(const Scenario& s, std::size_t k, std::uint64_t seed) {
  if (s.folds) return *s.folds;
  if (k < 2) throw ArgumentError("make_folds: k must be >= 2");
  if (k > s.n_instances())
    throw ArgumentError("make_folds: k = " + std::to_string(k) + " exceeds " + std::to_string(s.n_instances()) + " instances");
  std::vector<std::size_t> order(s.n_instances());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<int> folds(s.n_instances());
  for (std::size_t p = 0; p < order.size(); ++p) folds[order[p]] = static_cast<int>(p % k) + 1;
  return folds;
}

// ---------------------------------------------------------------------------
// Loading.

namespace detail {

/// Records the first repetition of each run and applies the censoring rule.
struct RunTable {
  std::vector<std::string> algorithms;
  std::map<std::pair<std::string, std::string>, std::pair<double, bool>> cells;  // (instance, algorithm) -> (y, censored)
  std::vector<std::string> instance_order;
  std::size_t ignored_repetitions = 0;

  void add(const std::string& inst, const std::string& algo, double repetition, double runtime, const std::string& status,
           double cutoff) {
    if (std::find(algorithms.begin(), algorithms.end(), algo) == algorithms.end()) algorithms.push_back(algo);
    const auto key = std::make_pair(inst, algo);
    if (cells.contains(key)) {
      ++ignored_repetitions;
      return;
    }
    (void)repetition;
    bool cens = status != "ok";
    double y = cens ? cutoff : runtime;
    if (!cens && (is_missing(y) || y >= cutoff)) {
      y = cutoff;
      cens = true;
    }
    if (!cens && y < 1e-6) y = 1e-6;
    cells.emplace(key, std::make_pair(y, cens));
    instance_order.push_back(inst);
  }
};

inline std::string list_offenders(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t k = 0; k < names.size() && k < 10; ++k) out += (k ? ", " : "") + names[k];
  if (names.size() > 10) out += ", ... (" + std::to_string(names.size()) + " total)";
  return out;
}

/// Fills the runtime matrix from the run table. Cells never run are censored.
inline void assemble_runs(Scenario& s, const RunTable& runs) {
  s.algorithms = runs.algorithms;
  const std::set<std::string> known(s.instances.begin(), s.instances.end());
  std::vector<std::string> unknown;
  std::set<std::string> seen_unknown;
  for (const auto& [key, value] : runs.cells)
    if (!known.contains(key.first) && seen_unknown.insert(key.first).second) unknown.push_back(key.first);
  std::set<std::string> with_runs;
  for (const auto& [key, value] : runs.cells) with_runs.insert(key.first);
  std::vector<std::string> without_runs;
  for (const auto& inst : s.instances)
    if (!with_runs.contains(inst)) without_runs.push_back(inst);
  if (!unknown.empty())
    throw ConsistencyError("instances with runs but no features: " + list_offenders(unknown));
  if (!without_runs.empty())
    throw ConsistencyError("instances with features but no runs: " + list_offenders(without_runs));

  const std::size_t m = s.algorithms.size();
  s.runtimes.assign(s.instances.size() * m, s.cutoff);
  s.censored.assign(s.instances.size() * m, 1);
  std::size_t missing = 0;
  for (std::size_t i = 0; i < s.instances.size(); ++i)
    for (std::size_t a = 0; a < m; ++a) {
      auto it = runs.cells.find({s.instances[i], s.algorithms[a]});
      if (it == runs.cells.end()) {
        ++missing;
        continue;
      }
      s.runtimes[i * m + a] = it->second.first;
      s.censored[i * m + a] = it->second.second ? 1 : 0;
    }
  if (missing > 0) log::warn(s.name, ": ", missing, " (instance, algorithm) runs missing; treated as censored");
  if (runs.ignored_repetitions > 0)
    log::info(s.name, ": ignored ", runs.ignored_repetitions, " repeated runs (first repetition kept)");
}

inline std::map<std::string, std::string> read_description(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("missing required file " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || std::isspace(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    kv[std::string(arff::detail::trim(std::string_view(line).substr(0, colon)))] =
        std::string(arff::detail::trim(std::string_view(line).substr(colon + 1)));
  }
  return kv;
}

inline arff::Table read_required(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw FormatError("missing required file " + file.string());
  return arff::read_file(file.string());
}

inline int require_column(const arff::Table& t, std::string_view name, const std::filesystem::path& file) {
  const int c = t.column(name);
  if (c < 0) throw FormatError(file.string() + ": missing column '" + std::string(name) + "'");
  return c;
}

inline Scenario load_aslib(const std::filesystem::path& dir) {
  Scenario s;
  const auto desc = read_description(dir / "description.txt");
  s.name = desc.contains("scenario_id") ? desc.at("scenario_id") : dir.filename().string();
  if (!desc.contains("algorithm_cutoff_time"))
    throw FormatError((dir / "description.txt").string() + ": missing algorithm_cutoff_time");
  s.cutoff = arff::to_number(desc.at("algorithm_cutoff_time"), "algorithm_cutoff_time");
  if (!(s.cutoff > 0.0)) throw FormatError((dir / "description.txt").string() + ": cutoff must be positive");

  // Features: first repetition per instance; instance order follows this file.
  const auto feat_path = dir / "feature_values.arff";
  const auto feat = read_required(feat_path);
  const int f_inst = require_column(feat, "instance_id", feat_path);
  const int f_rep = feat.column("repetition");
  std::vector<std::size_t> feature_cols;
  for (std::size_t k = 0; k < feat.attributes.size(); ++k)
    if (static_cast<int>(k) != f_inst && static_cast<int>(k) != f_rep) {
      feature_cols.push_back(k);
      s.feature_names.push_back(feat.attributes[k].name);
    }
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<double> buf(feature_cols.size());
  for (const auto& row : feat.rows) {
    const std::string& inst = row[static_cast<std::size_t>(f_inst)];
    if (row_of.contains(inst)) continue;
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      buf[j] = arff::to_number(row[feature_cols[j]], feat_path.string());
    row_of.emplace(inst, s.instances.size());
    s.instances.push_back(inst);
    s.features.push_row(buf);
  }
  if (s.instances.empty()) throw FormatError(feat_path.string() + ": no feature rows");

  const auto runs_path = dir / "algorithm_runs.arff";
  const auto runs_table = read_required(runs_path);
  if (runs_table.rows.empty()) throw FormatError(runs_path.string() + ": no algorithm runs");
  const int r_inst = require_column(runs_table, "instance_id", runs_path);
  const int r_algo = require_column(runs_table, "algorithm", runs_path);
  const int r_stat = require_column(runs_table, "runstatus", runs_path);
  const int r_rep = runs_table.column("repetition");
  int r_perf = runs_table.column("runtime");
  if (r_perf < 0)
    for (std::size_t k = 0; k < runs_table.attributes.size(); ++k) {
      const int c = static_cast<int>(k);
      if (c != r_inst && c != r_algo && c != r_stat && c != r_rep && runs_table.attributes[k].type == arff::AttributeType::Numeric) {
        r_perf = c;
        break;
      }
    }
  if (r_perf < 0) throw FormatError(runs_path.string() + ": no performance column");
  RunTable runs;
  for (const auto& row : runs_table.rows) {
    const double rep = r_rep >= 0 ? arff::to_number(row[static_cast<std::size_t>(r_rep)], runs_path.string()) : 1.0;
    runs.add(row[static_cast<std::size_t>(r_inst)], row[static_cast<std::size_t>(r_algo)], rep,
             arff::to_number(row[static_cast<std::size_t>(r_perf)], runs_path.string()),
             row[static_cast<std::size_t>(r_stat)], s.cutoff);
  }
  assemble_runs(s, runs);

  // Feature costs: sum over all groups, first repetition.
  s.feature_costs.assign(s.instances.size(), 0.0);
  const auto cost_path = dir / "feature_costs.arff";
  if (std::filesystem::exists(cost_path)) {
    const auto costs = arff::read_file(cost_path.string());
    const int c_inst = require_column(costs, "instance_id", cost_path);
    const int c_rep = costs.column("repetition");
    std::set<std::string> done;
    for (const auto& row : costs.rows) {
      const std::string& inst = row[static_cast<std::size_t>(c_inst)];
      auto it = row_of.find(inst);
      if (it == row_of.end() || !done.insert(inst).second) continue;
      double total = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (static_cast<int>(k) == c_inst || static_cast<int>(k) == c_rep) continue;
        const double v = arff::to_number(row[k], cost_path.string());
        if (!is_missing(v)) total += v;
      }
      s.feature_costs[it->second] = total;
    }
  }

  const auto cv_path = dir / "cv.arff";
  if (std::filesystem::exists(cv_path)) {
    const auto cv = arff::read_file(cv_path.string());
    const int c_inst = require_column(cv, "instance_id", cv_path);
    const int c_fold = require_column(cv, "fold", cv_path);
    std::vector<int> folds(s.instances.size(), 0);
    for (const auto& row : cv.rows) {
      auto it = row_of.find(row[static_cast<std::size_t>(c_inst)]);
      if (it == row_of.end()) continue;
      folds[it->second] = static_cast<int>(arff::to_number(row[static_cast<std::size_t>(c_fold)], cv_path.string()));
    }
    std::vector<std::string> unassigned;
    for (std::size_t i = 0; i < folds.size(); ++i)
      if (folds[i] < 1) unassigned.push_back(s.instances[i]);
    if (!unassigned.empty()) throw ConsistencyError(cv_path.string() + ": instances without fold: " + list_offenders(unassigned));
    s.folds = std::move(folds);
  }
  s.validate();
  return s;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file, bool required) {
  std::ifstream in(file);
  if (!in) {
    if (required) throw FormatError("missing required file " + file.string());
    return {};
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (arff::detail::trim(line).empty()) continue;
    rows.push_back(arff::detail::split_row(line));
  }
  return rows;
}

inline Scenario load_csv_trio(const std::filesystem::path& dir) {
  Scenario s;
  const auto meta = read_csv(dir / "meta.csv", true);
  for (std::size_t r = 1; r < meta.size(); ++r) {
    if (meta[r].size() < 2) continue;
    if (meta[r][0] == "name") s.name = meta[r][1];
    else if (meta[r][0] == "cutoff") s.cutoff = arff::to_number(meta[r][1], "meta.csv cutoff");
  }
  if (!(s.cutoff > 0.0)) throw FormatError((dir / "meta.csv").string() + ": missing or invalid cutoff");
  if (s.name.empty()) s.name = dir.filename().string();

  const auto feat_path = dir / "features.csv";
  const auto feat = read_csv(feat_path, true);
  if (feat.empty() || feat[0].empty() || feat[0][0] != "instance_id")
    throw FormatError(feat_path.string() + ": header must start with instance_id");
  int cost_col = -1;
  std::vector<std::size_t> cols;
  for (std::size_t k = 1; k < feat[0].size(); ++k) {
    if (feat[0][k] == "feature_cost") cost_col = static_cast<int>(k);
    else {
      cols.push_back(k);
      s.feature_names.push_back(feat[0][k]);
    }
  }
  std::unordered_map<std::string, std::size_t> row_of;
  std::vector<double> buf(cols.size());
  for (std::size_t r = 1; r < feat.size(); ++r) {
    if (feat[r].size() != feat[0].size()) throw FormatError(feat_path.string() + ": ragged row " + std::to_string(r + 1));
    for (std::size_t j = 0; j < cols.size(); ++j) buf[j] = arff::to_number(feat[r][cols[j]], feat_path.string());
    row_of.emplace(feat[r][0], s.instances.size());
    s.instances.push_back(feat[r][0]);
    s.features.push_row(buf);
    s.feature_costs.push_back(cost_col >= 0 ? arff::to_number(feat[r][static_cast<std::size_t>(cost_col)], feat_path.string()) : 0.0);
    if (is_missing(s.feature_costs.back())) s.feature_costs.back() = 0.0;
  }
  if (s.instances.empty()) throw FormatError(feat_path.string() + ": no instances");

  const auto runs_path = dir / "runs.csv";
  const auto runs_rows = read_csv(runs_path, true);
  if (runs_rows.size() < 2) throw FormatError(runs_path.string() + ": no algorithm runs");
  const auto& head = runs_rows[0];
  auto col = [&](std::string_view name) {
    for (std::size_t k = 0; k < head.size(); ++k)
      if (head[k] == name) return k;
    throw FormatError(runs_path.string() + ": missing column '" + std::string(name) + "'");
  };
  const auto c_inst = col("instance_id"), c_algo = col("algorithm"), c_rt = col("runtime"), c_st = col("status");
  RunTable runs;
  for (std::size_t r = 1; r < runs_rows.size(); ++r) {
    const auto& row = runs_rows[r];
    if (row.size() != head.size()) throw FormatError(runs_path.string() + ": ragged row " + std::to_string(r + 1));
    runs.add(row[c_inst], row[c_algo], 1.0, arff::to_number(row[c_rt], runs_path.string()), row[c_st], s.cutoff);
  }
  assemble_runs(s, runs);

  const auto cv = read_csv(dir / "cv.csv", false);
  if (!cv.empty()) {
    std::vector<int> folds(s.instances.size(), 0);
    for (std::size_t r = 1; r < cv.size(); ++r) {
      auto it = row_of.find(cv[r].at(0));
      if (it != row_of.end()) folds[it->second] = static_cast<int>(arff::to_number(cv[r].at(1), "cv.csv"));
    }
    if (std::any_of(folds.begin(), folds.end(), [](int f) { return f < 1; }))
      throw ConsistencyError((dir / "cv.csv").string() + ": not every instance has a fold");
    s.folds = std::move(folds);
  }
  s.validate();
  return s;
}

}  // namespace detail

/// Loads an ASlib scenario directory, or a directory holding the CSV trio
/// (meta.csv, features.csv, runs.csv, optional cv.csv).
inline Scenario load_scenario(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("scenario directory not found: " + dir.string());
  if (std::filesystem::exists(dir / "description.txt")) return detail::load_aslib(dir);
  if (std::filesystem::exists(dir / "meta.csv")) return detail::load_csv_trio(dir);
  throw FormatError("missing required file " + (dir / "description.txt").string() + " (or meta.csv)");
}

/// Writes the CSV trio understood by load_scenario.
inline void write_scenario_csv(const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto fmt = [](double v) {
    if (is_missing(v)) return std::string("?");
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  {
    std::ofstream meta(dir / "meta.csv");
    meta << "key,value\nname," << s.name << "\ncutoff," << fmt(s.cutoff) << '\n';
  }
  {
    std::ofstream feat(dir / "features.csv");
    feat << "instance_id,feature_cost";
    for (const auto& n : s.feature_names) feat << ',' << n;
    feat << '\n';
    for (std::size_t i = 0; i < s.n_instances(); ++i) {
      feat << s.instances[i] << ',' << fmt(s.feature_costs[i]);
      for (double v : s.features.row(i)) feat << ',' << fmt(v);
      feat << '\n';
    }
  }
  {
    std::ofstream runs(dir / "runs.csv");
    runs << "instance_id,algorithm,runtime,status\n";
    for (std::size_t i = 0; i < s.n_instances(); ++i)
      for (std::size_t a = 0; a < s.n_algorithms(); ++a)
        runs << s.instances[i] << ',' << s.algorithms[a] << ',' << fmt(s.runtime(i, a)) << ','
             << (s.is_censored(i, a) ? "timeout" : "ok") << '\n';
  }
  if (s.folds) {
    std::ofstream cv(dir / "cv.csv");
    cv << "instance_id,fold\n";
    for (std::size_t i = 0; i < s.n_instances(); ++i) cv << s.instances[i] << ',' << (*s.folds)[i] << '\n';
  }
}

}  // namespace survsel
