// survsel command-line tool: scenario statistics, synthetic scenarios,
// cross-validated evaluation, benchmark sweeps and surrogate-loss tuning.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "survsel/survsel.hpp"

namespace fs = std::filesystem;
using namespace survsel;

namespace {

/// Usage problems (bad flags, existing output) exit with 2; failures while running exit with 1.
struct UsageError : Error {
  using Error::Error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  bool overwrite = false;
  std::string log_level;
  std::vector<std::string> scenarios;
};

RunConfig resolve(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) c = load_config(o.config);
  apply_env_overrides(c);
  if (o.seed) apply_config_value(c, "seed", std::to_string(*o.seed), "--seed");
  if (o.jobs) apply_config_value(c, "jobs", std::to_string(*o.jobs), "--jobs");
  if (!o.out.empty()) apply_config_value(c, "out", o.out, "--out");
  if (!o.log_level.empty()) apply_config_value(c, "log_level", o.log_level, "--log-level");
  if (!o.scenarios.empty()) {
    std::string joined;
    for (const auto& s : o.scenarios) joined += (joined.empty() ? "" : ",") + s;
    apply_config_value(c, "scenarios", joined, "command line");
  }
  const std::string& lvl = c.log_level;
  log::set_level(lvl == "debug" ? log::Level::Debug
                 : lvl == "info" ? log::Level::Info
                 : lvl == "error" ? log::Level::Error
                                  : log::Level::Warn);
  return c;
}

fs::path prepare_out(const RunConfig& c, bool overwrite) {
  if (c.out.empty()) throw UsageError("field 'out': required (set it in the config file or pass --out)");
  const fs::path dir(c.out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError("output path exists and is not a directory: " + c.out);
    if (!fs::is_empty(dir) && !overwrite)
      throw UsageError("output directory " + c.out + " is not empty; pass --overwrite to reuse it");
  }
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot write " + file.string());
  return os;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& c) {
  nlohmann::ordered_json m;
  m["tool"] = "survsel";
  m["version"] = kVersion;
  m["command"] = command;
  if (c.seed) m["seed"] = *c.seed;
  m["jobs"] = c.jobs;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.echo) cfg[k] = v;
  m["config"] = cfg;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m["created"] = stamp;
  auto os = open_out(dir / "manifest.json");
  os << m.dump(2) << '\n';
}

std::vector<Scenario> load_all(const RunConfig& c) {
  if (c.scenarios.empty()) throw UsageError("field 'scenarios': at least one scenario directory is required");
  std::vector<Scenario> out;
  for (const auto& path : c.scenarios) {
    log::info("loading ", path);
    out.push_back(load_scenario(path));
  }
  return out;
}

int cmd_stats(const Options& o) {
  const RunConfig c = resolve(o);
  const auto scenarios = load_all(c);
  std::printf("%-24s %8s %6s %4s %5s %10s %6s\n", "scenario", "#I", "#U", "#A", "#F", "C", "%C");
  std::string csv = "scenario,instances,unsolvable,algorithms,features,cutoff,pct_censored\n";
  for (const auto& s : scenarios) {
    const ScenarioStats st = compute_stats(s);
    std::printf("%-24s %8zu %6zu %4zu %5zu %10g %6.1f\n", s.name.c_str(), st.n_instances, st.n_unsolvable,
                st.n_algorithms, st.n_features, st.cutoff, st.pct_censored);
    csv += s.name + ',' + std::to_string(st.n_instances) + ',' + std::to_string(st.n_unsolvable) + ',' +
           std::to_string(st.n_algorithms) + ',' + std::to_string(st.n_features) + ',' + format_number(st.cutoff) +
           ',' + format_number(st.pct_censored) + '\n';
  }
  if (!c.out.empty()) {
    const fs::path dir = prepare_out(c, o.overwrite);
    open_out(dir / "stats.csv") << csv;
    write_manifest(dir, "stats", c);
  }
  return 0;
}

int cmd_synth(const Options& o) {
  RunConfig c = resolve(o);
  c.synth.seed = c.require_seed();
  const fs::path dir = prepare_out(c, o.overwrite);
  const SyntheticScenario syn = generate_synthetic(c.synth);
  write_scenario_csv(syn.scenario, dir);
  write_manifest(dir, "synth", c);
  log::info("wrote ", syn.scenario.n_instances(), " instances to ", dir.string());
  return 0;
}

void write_reports(const fs::path& dir, const std::vector<EvaluationReport>& reports) {
  {
    auto os = open_out(dir / "summary.csv");
    write_summary_csv(os, reports);
  }
  {
    auto os = open_out(dir / "folds.csv");
    write_folds_csv(os, reports);
  }
  {
    auto os = open_out(dir / "instances.csv");
    write_instances_csv(os, reports);
  }
}

int report_status(const std::vector<EvaluationReport>& reports) {
  int status = 0;
  for (const auto& r : reports) {
    if (!r.complete()) {
      log::error(r.selector, " on ", r.scenario, ": ", r.failed_folds, " fold(s) failed");
      status = 1;
    }
  }
  return status;
}

int cmd_evaluate(const Options& o) {
  const RunConfig c = resolve(o);
  const std::uint64_t seed = c.require_seed();
  if (c.selectors.size() != 1) throw ConfigError("field 'selectors': evaluate takes exactly one selector");
  const fs::path dir = prepare_out(c, o.overwrite);
  const auto scenarios = load_all(c);
  std::vector<EvaluationReport> reports;
  for (const auto& s : scenarios) {
    SelectorConfig sc = c.selector_config(c.selectors.front());
    sc.jobs = 1;
    reports.push_back(evaluate_selector(sc, s, c.folds, seed, c.jobs));
    log::info(reports.back().selector, " on ", s.name, ": nPAR10 = ", reports.back().npar10);
  }
  write_reports(dir, reports);
  write_manifest(dir, "evaluate", c);
  return report_status(reports);
}

int cmd_sweep(const Options& o) {
  const RunConfig c = resolve(o);
  const std::uint64_t seed = c.require_seed();
  const fs::path dir = prepare_out(c, o.overwrite);
  const auto scenarios = load_all(c);
  const std::size_t n_sel = c.selectors.size();
  std::vector<EvaluationReport> reports(scenarios.size() * n_sel);
  parallel_for(reports.size(), c.jobs, [&](std::size_t k) {
    SelectorConfig sc = c.selector_config(c.selectors[k % n_sel]);
    sc.jobs = 1;
    reports[k] = evaluate_selector(sc, scenarios[k / n_sel], c.folds, seed, 1);
    log::info(reports[k].selector, " on ", reports[k].scenario, ": nPAR10 = ", reports[k].npar10);
  });
  write_reports(dir, reports);
  const auto rows = aggregate(reports);
  {
    auto os = open_out(dir / "aggregate.csv");
    write_aggregate_csv(os, rows);
  }
  open_out(dir / "aggregate.json") << aggregate_json(rows).dump(2) << '\n';
  write_manifest(dir, "sweep", c);
  return report_status(reports);
}

int cmd_tune(const Options& o) {
  const RunConfig c = resolve(o);
  const std::uint64_t seed = c.require_seed();
  const fs::path dir = prepare_out(c, o.overwrite);
  const auto scenarios = load_all(c);
  auto summary = open_out(dir / "tune_summary.csv");
  summary << "scenario,best_loss,validation_par10,evaluations,degenerate\n";
  for (const auto& s : scenarios) {
    TuneBudget b = c.selector.tuning;
    b.seed = seed;
    const TuneResult r = tune_surrogate(ScenarioView::all(s), b, c.selector.survival_forest, c.selector.transform, c.jobs);
    {
      auto os = open_out(dir / ("trace_" + s.name + ".csv"));
      write_trace_csv(os, r);
    }
    summary << s.name << ',' << to_string(r.best) << ',' << format_number(r.trace[r.best_index].validation_par10) << ','
            << r.trace.size() << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
  write_manifest(dir, "tune", c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Algorithm selection with random survival forests"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config file)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads; results do not depend on it")->check(CLI::Range(1, 1024));
  app.add_option("--config", o.config, "Config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--overwrite", o.overwrite, "Allow writing into a non-empty output directory");
  app.add_option("--log-level", o.log_level, "debug, info, warn or error (default warn)");

  auto* stats = app.add_subcommand("stats", "Print scenario statistics");
  stats->add_option("scenarios", o.scenarios, "Scenario directories");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario directory from synth.* config keys");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate one selector");
  evaluate->add_option("scenarios", o.scenarios, "Scenario directories");
  auto* sweep = app.add_subcommand("sweep", "Cross-validate every configured selector on every scenario");
  sweep->add_option("scenarios", o.scenarios, "Scenario directories");
  auto* tune = app.add_subcommand("tune", "Tune the surrogate loss on whole scenarios and write the search trace");
  tune->add_option("scenarios", o.scenarios, "Scenario directories");
  for (auto* sub : {stats, synth, evaluate, sweep, tune}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*seed_opt) o.seed = seed;
  if (*jobs_opt) o.jobs = jobs;

  try {
    if (*stats) return cmd_stats(o);
    if (*synth) return cmd_synth(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*sweep) return cmd_sweep(o);
    if (*tune) return cmd_tune(o);
  } catch (const UsageError& e) {
    std::cerr << "survsel: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "survsel: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "survsel: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
