#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "survsel/errors.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/parallel.hpp"
#include "survsel/scenario.hpp"
#include "survsel/selectors.hpp"
#include "survsel/tuning.hpp"

namespace survsel {

struct InstanceRecord {
  int fold = 0;
  std::string instance;
  std::string algorithm;
  double charged_time = 0.0;
  bool timed_out = false;
  double par10 = 0.0;
  double par10_vbs = 0.0;
  double par10_sbs = 0.0;
};

struct FoldReport {
  int fold = 0;
  bool failed = false;
  std::string error;
  std::size_t n_test = 0, timeouts = 0, solved = 0;
  double par10 = 0.0, par10_vbs = 0.0, par10_sbs = 0.0, npar10 = 0.0;
};

struct EvaluationReport {
  std::string scenario;
  std::string selector;
  std::vector<FoldReport> folds;
  std::vector<InstanceRecord> instances;
  /// Pooled over the test instances of all completed folds.
  double par10 = 0.0, par10_vbs = 0.0, par10_sbs = 0.0, npar10 = 0.0;
  /// Mean of per-fold nPAR10 over completed folds.
  double npar10_fold_mean = 0.0;
  std::size_t n_test = 0, timeouts = 0, solved = 0, failed_folds = 0;
  std::string note;

  bool complete() const { return failed_folds == 0; }
};

/// (model - vbs) / (sbs - vbs); when sbs == vbs: 0 if the model matches, else +inf.
inline double normalized_par10(double model, double vbs, double sbs) {
  if (sbs == vbs) return model == vbs ? 0.0 : std::numeric_limits<double>::infinity();
  return (model - vbs) / (sbs - vbs);
}

/// PAR10 of running algorithm a on instance i, charging the feature cost
/// first. The run times out if it was censored or the charged time exceeds C.
inline InstanceRecord charge(const Scenario& s, std::size_t i, std::size_t a, bool pay_features) {
  InstanceRecord r;
  r.instance = s.instances[i];
  r.algorithm = s.algorithms[a];
  r.charged_time = (pay_features ? s.feature_costs[i] : 0.0) + s.runtime(i, a);
  r.timed_out = s.is_censored(i, a) || r.charged_time > s.cutoff;
  r.par10 = r.timed_out ? 10.0 * s.cutoff : r.charged_time;
  return r;
}

namespace detail {

inline void summarize(const std::vector<InstanceRecord>& recs, std::size_t& n, std::size_t& timeouts,
                      std::size_t& solved, double& par10, double& vbs, double& sbs) {
  n = recs.size();
  timeouts = solved = 0;
  par10 = vbs = sbs = 0.0;
  for (const auto& r : recs) {
    timeouts += r.timed_out ? 1 : 0;
    solved += r.timed_out ? 0 : 1;
    par10 += r.par10;
    vbs += r.par10_vbs;
    sbs += r.par10_sbs;
  }
  if (n > 0) {
    par10 /= static_cast<double>(n);
    vbs /= static_cast<double>(n);
    sbs /= static_cast<double>(n);
  }
}

}  // namespace detail

/// k-fold cross-validation of one selector on one scenario. Unsolvable
/// instances are dropped from the test folds only. A fold whose selector
/// fails to fit is marked failed and excluded from the pooled numbers.
inline EvaluationReport evaluate_selector(const SelectorConfig& config, const Scenario& s, std::size_t k_folds,
                                          std::uint64_t seed, int jobs = 1) {
  config.validate();
  s.validate();
  const std::vector<int> folds = make_folds(s, k_folds, seed);
  const int n_folds = *std::max_element(folds.begin(), folds.end());

  EvaluationReport rep;
  rep.scenario = s.name;
  rep.selector = to_string(config.kind);
  rep.folds.resize(static_cast<std::size_t>(n_folds));
  std::vector<std::vector<InstanceRecord>> per_fold(static_cast<std::size_t>(n_folds));

  parallel_for(static_cast<std::size_t>(n_folds), jobs, [&](std::size_t fi) {
    const int f = static_cast<int>(fi) + 1;
    FoldReport& fr = rep.folds[fi];
    fr.fold = f;
    ScenarioView train{&s, {}}, test{&s, {}};
    for (std::size_t i = 0; i < s.n_instances(); ++i) {
      if (folds[i] != f) train.rows.push_back(i);
      else if (!s.unsolvable(i)) test.rows.push_back(i);
    }
    try {
      if (train.empty()) throw ArgumentError("fold " + std::to_string(f) + " has no training instances");
      SBSSelector sbs;
      sbs.fit(train, 0);
      const std::size_t sbs_choice = sbs.choice();
      std::unique_ptr<Selector> sel;
      if (config.kind != SelectorKind::VBS) {
        sel = make_selector(config);
        sel->fit(train, mix_seed(seed, fi));
      }
      for (auto i : test.rows) {
        const std::size_t a = sel ? sel->select(s.features.row(i)) : vbs_choice(s, i);
        InstanceRecord r = charge(s, i, a, sel && sel->uses_features());
        r.fold = f;
        r.par10_vbs = charge(s, i, vbs_choice(s, i), false).par10;
        r.par10_sbs = charge(s, i, sbs_choice, false).par10;
        per_fold[fi].push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.error = e.what();
      per_fold[fi].clear();
      log::error("evaluate ", rep.selector, " on ", s.name, " fold ", f, ": ", e.what());
    }
    detail::summarize(per_fold[fi], fr.n_test, fr.timeouts, fr.solved, fr.par10, fr.par10_vbs, fr.par10_sbs);
    fr.npar10 = normalized_par10(fr.par10, fr.par10_vbs, fr.par10_sbs);
  });

  std::size_t completed = 0;
  for (std::size_t fi = 0; fi < per_fold.size(); ++fi) {
    if (rep.folds[fi].failed) {
      ++rep.failed_folds;
      continue;
    }
    ++completed;
    rep.npar10_fold_mean += rep.folds[fi].npar10;
    for (auto& r : per_fold[fi]) rep.instances.push_back(std::move(r));
  }
  if (completed > 0) rep.npar10_fold_mean /= static_cast<double>(completed);
  detail::summarize(rep.instances, rep.n_test, rep.timeouts, rep.solved, rep.par10, rep.par10_vbs, rep.par10_sbs);
  rep.npar10 = normalized_par10(rep.par10, rep.par10_vbs, rep.par10_sbs);
  if (rep.par10_sbs == rep.par10_vbs) rep.note = "SBS-optimal scenario";
  if (rep.failed_folds > 0) {
    if (!rep.note.empty()) rep.note += "; ";
    rep.note += std::to_string(rep.failed_folds) + " failed fold(s)";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Aggregation.

struct AggregateRow {
  std::string selector;
  double median_npar10 = 0.0;
  double mean_npar10 = 0.0;
  double mean_rank = 0.0;
  std::size_t n_scenarios = 0;
};

/// Average ranks (1 = best) of the values; ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t p = 0; p < order.size();) {
    std::size_t q = p;
    while (q + 1 < order.size() && values[order[q + 1]] == values[order[p]]) ++q;
    const double r = 0.5 * static_cast<double>(p + q) + 1.0;
    for (std::size_t k = p; k <= q; ++k) ranks[order[k]] = r;
    p = q + 1;
  }
  return ranks;
}

/// Median and mean nPAR10 plus mean within-scenario rank per selector,
/// sorted by mean rank (then name). Every selector must cover every scenario.
inline std::vector<AggregateRow> aggregate(const std::vector<EvaluationReport>& reports) {
  std::set<std::string> selectors, scenarios;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : reports) {
    selectors.insert(r.selector);
    scenarios.insert(r.scenario);
    if (!cell.emplace(std::make_pair(r.scenario, r.selector), r.npar10).second)
      throw AggregationError("duplicate report for selector " + r.selector + " on scenario " + r.scenario);
  }
  std::string gaps;
  for (const auto& sc : scenarios)
    for (const auto& se : selectors)
      if (!cell.count({sc, se})) gaps += (gaps.empty() ? "" : ", ") + se + "@" + sc;
  if (!gaps.empty()) throw AggregationError("missing evaluations: " + gaps);

  std::map<std::string, std::vector<double>> values, ranks;
  for (const auto& sc : scenarios) {
    std::vector<std::string> names(selectors.begin(), selectors.end());
    std::vector<double> v;
    for (const auto& se : names) v.push_back(cell.at({sc, se}));
    const auto r = average_ranks(v);
    for (std::size_t k = 0; k < names.size(); ++k) {
      values[names[k]].push_back(v[k]);
      ranks[names[k]].push_back(r[k]);
    }
  }
  std::vector<AggregateRow> rows;
  for (const auto& se : selectors) {
    AggregateRow row;
    row.selector = se;
    row.n_scenarios = scenarios.size();
    auto v = values[se];
    row.median_npar10 = median_of(v);
    for (double x : v) row.mean_npar10 += x / static_cast<double>(v.size());
    for (double x : ranks[se]) row.mean_rank += x / static_cast<double>(v.size());
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const AggregateRow& a, const AggregateRow& b) { return a.mean_rank < b.mean_rank; });
  return rows;
}

// ---------------------------------------------------------------------------
// Report files. Numbers use the shortest round-trip form; +inf prints as "inf".

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return detail::format_double(v);
}

inline void write_summary_csv(std::ostream& os, const std::vector<EvaluationReport>& reports) {
  os << "scenario,selector,par10,par10_vbs,par10_sbs,npar10,npar10_fold_mean,n_test,timeouts,solved,failed_folds,note\n";
  for (const auto& r : reports)
    os << r.scenario << ',' << r.selector << ',' << format_number(r.par10) << ',' << format_number(r.par10_vbs) << ','
       << format_number(r.par10_sbs) << ',' << format_number(r.npar10) << ',' << format_number(r.npar10_fold_mean)
       << ',' << r.n_test << ',' << r.timeouts << ',' << r.solved << ',' << r.failed_folds << ',' << r.note << '\n';
}

inline void write_folds_csv(std::ostream& os, const std::vector<EvaluationReport>& reports) {
  os << "scenario,selector,fold,failed,n_test,timeouts,solved,par10,par10_vbs,par10_sbs,npar10\n";
  for (const auto& r : reports)
    for (const auto& f : r.folds)
      os << r.scenario << ',' << r.selector << ',' << f.fold << ',' << (f.failed ? 1 : 0) << ',' << f.n_test << ','
         << f.timeouts << ',' << f.solved << ',' << format_number(f.par10) << ',' << format_number(f.par10_vbs) << ','
         << format_number(f.par10_sbs) << ',' << format_number(f.npar10) << '\n';
}

inline void write_instances_csv(std::ostream& os, const std::vector<EvaluationReport>& reports) {
  os << "scenario,selector,fold,instance,algorithm,charged_time,timed_out,par10\n";
  for (const auto& r : reports)
    for (const auto& i : r.instances)
      os << r.scenario << ',' << r.selector << ',' << i.fold << ',' << i.instance << ',' << i.algorithm << ','
         << format_number(i.charged_time) << ',' << (i.timed_out ? 1 : 0) << ',' << format_number(i.par10) << '\n';
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "selector,median_npar10,mean_npar10,mean_rank,n_scenarios\n";
  for (const auto& r : rows)
    os << r.selector << ',' << format_number(r.median_npar10) << ',' << format_number(r.mean_npar10) << ','
       << format_number(r.mean_rank) << ',' << r.n_scenarios << '\n';
}

inline nlohmann::ordered_json aggregate_json(const std::vector<AggregateRow>& rows) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return format_number(v);
  };
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    out.push_back({{"selector", r.selector},
                   {"median_npar10", num(r.median_npar10)},
                   {"mean_npar10", num(r.mean_npar10)},
                   {"mean_rank", num(r.mean_rank)},
                   {"n_scenarios", r.n_scenarios}});
  return out;
}

}  // namespace survsel
