#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/features.hpp"
#include "survsel/forest.hpp"
#include "survsel/log.hpp"
#include "survsel/scenario.hpp"

namespace survsel {

/// One observation (x, y, delta); delta = true means right-censored at y = C.
struct SurvivalSample {
  std::vector<double> x;
  double y = 0.0;
  bool delta = false;
};

/// Column-oriented set of survival samples for one algorithm.
struct SurvivalDataset {
  FeatureMatrix x;
  std::vector<double> times;
  std::vector<std::uint8_t> censored;
  double cutoff = 0.0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  SurvivalSample sample(std::size_t i) const {
    auto r = x.row(i);
    return {std::vector<double>(r.begin(), r.end()), times[i], censored[i] != 0};
  }

  void push_back(const SurvivalSample& s) {
    x.push_row(s.x);
    times.push_back(s.y);
    censored.push_back(s.delta ? 1 : 0);
  }

  std::size_t n_uncensored() const {
    return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), std::uint8_t{0}));
  }
};

/// Training set for a point-regression model.
struct RegressionDataset {
  FeatureMatrix x;
  std::vector<double> labels;
  /// Position of each row in the source SurvivalDataset.
  std::vector<std::size_t> source;
};

struct ImputationStrategy {
  enum class Kind { Ignore, CutoffRuntime, PAR10, SchmeeHahn };
  Kind kind = Kind::CutoffRuntime;
  std::size_t max_iter = 10;
  double rel_tol = 1e-3;

  static ImputationStrategy ignore() { return {Kind::Ignore}; }
  static ImputationStrategy cutoff_runtime() { return {Kind::CutoffRuntime}; }
  static ImputationStrategy par10() { return {Kind::PAR10}; }
  static ImputationStrategy schmee_hahn(std::size_t max_iter = 10, double rel_tol = 1e-3) {
    return {Kind::SchmeeHahn, max_iter, rel_tol};
  }

  void validate() const {
    if (max_iter < 1) throw ArgumentError("imputation: max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw ArgumentError("imputation: rel_tol must be > 0");
  }

  friend bool operator==(const ImputationStrategy&, const ImputationStrategy&) = default;
};

inline std::string to_string(const ImputationStrategy& s) {
  switch (s.kind) {
    case ImputationStrategy::Kind::Ignore: return "ignore";
    case ImputationStrategy::Kind::CutoffRuntime: return "runtime";
    case ImputationStrategy::Kind::PAR10: return "par10";
    case ImputationStrategy::Kind::SchmeeHahn: return "schmee_hahn";
  }
  return "";
}

inline ImputationStrategy parse_imputation(std::string_view name) {
  if (name == "ignore" || name == "ignored") return ImputationStrategy::ignore();
  if (name == "runtime" || name == "cutoff") return ImputationStrategy::cutoff_runtime();
  if (name == "par10") return ImputationStrategy::par10();
  if (name == "schmee_hahn" || name == "sh") return ImputationStrategy::schmee_hahn();
  throw ArgumentError("unknown imputation strategy '" + std::string(name) + "'");
}

/// Survival samples of algorithm `a` on the given instances. Missing feature
/// values are replaced by medians over these instances.
inline SurvivalDataset build_survival_dataset(const Scenario& s, std::size_t a, std::span<const std::size_t> rows) {
  if (a >= s.n_algorithms()) throw ArgumentError("build_survival_dataset: algorithm index out of range");
  if (rows.empty()) throw ArgumentError("build_survival_dataset: empty training set");
  SurvivalDataset d;
  d.cutoff = s.cutoff;
  d.x = FeatureMatrix(0, s.n_features());
  for (auto i : rows) {
    if (i >= s.n_instances()) throw ArgumentError("build_survival_dataset: instance index out of range");
    d.x.push_row(s.features.row(i));
    d.times.push_back(s.runtime(i, a));
    d.censored.push_back(s.is_censored(i, a) ? 1 : 0);
  }
  impute_missing(d.x, column_medians(d.x));
  return d;
}

inline SurvivalDataset build_survival_dataset(const ScenarioView& view, std::size_t a) {
  return build_survival_dataset(view.base(), a, view.rows);
}

// ---------------------------------------------------------------------------

inline double standard_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// Mean of N(mu, sigma^2) conditioned on being >= lower.
inline double truncated_normal_mean(double mu, double sigma, double lower) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("truncated_normal_mean: sigma must be > 0");
  if (lower == -std::numeric_limits<double>::infinity()) return mu;
  const double a = (lower - mu) / sigma;
  double mills = 0.0;  // phi(a) / (1 - Phi(a))
  if (a > 8.0) {
    // Tail continued fraction: a + 1/(a + 2/(a + 3/(a + ...))).
    mills = a;
    for (int k = 60; k >= 1; --k) mills = a + k / mills;
  } else if (a < -8.0) {
    mills = standard_normal_pdf(a);
  } else {
    mills = standard_normal_pdf(a) / (0.5 * std::erfc(a / std::numbers::sqrt2));
  }
  return std::max(mu + sigma * mills, lower);
}

struct SchmeeHahnResult {
  RegressionDataset data;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Iterative truncated-normal imputation of censored labels.
///
/// Censored labels start at C. Each round fits a model on all points, predicts
/// (mu, sigma^2) for every censored point and replaces its label with the mean
/// of N(mu, sigma^2) truncated below at C (or max(mu, C) if sigma = 0).
/// Stops when the largest relative label change falls below rel_tol.
///
/// `factory(seed)` must return a model with fit(FeatureMatrix, span<const double>)
/// and predict_mean_variance(span<const double>) -> MeanVariance.
template <typename Factory>
SchmeeHahnResult schmee_hahn(const SurvivalDataset& d, Factory&& factory, std::size_t max_iter, double rel_tol,
                             std::uint64_t seed) {
  if (max_iter < 1) throw ArgumentError("schmee_hahn: max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw ArgumentError("schmee_hahn: rel_tol must be > 0");
  if (d.n_uncensored() == 0) throw DegenerateDataError("schmee_hahn: no uncensored samples");

  SchmeeHahnResult out;
  out.data.x = d.x;
  out.data.labels = d.times;
  out.data.source.resize(d.size());
  std::vector<std::size_t> censored_rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.data.source[i] = i;
    if (d.censored[i]) {
      out.data.labels[i] = d.cutoff;
      censored_rows.push_back(i);
    }
  }
  if (censored_rows.empty()) return {std::move(out.data), 0, true};

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    auto model = factory(mix_seed(seed, iter));
    model.fit(out.data.x, std::span<const double>(out.data.labels));
    double max_change = 0.0;
    std::vector<double> next(censored_rows.size());
    for (std::size_t k = 0; k < censored_rows.size(); ++k) {
      const std::size_t i = censored_rows[k];
      const MeanVariance mv = model.predict_mean_variance(out.data.x.row(i));
      const double sigma = std::sqrt(std::max(mv.variance, 0.0));
      next[k] = sigma > 0.0 ? truncated_normal_mean(mv.mean, sigma, d.cutoff) : std::max(mv.mean, d.cutoff);
      const double old = out.data.labels[i];
      max_change = std::max(max_change, std::abs(next[k] - old) / std::max(std::abs(old), 1e-12));
    }
    for (std::size_t k = 0; k < censored_rows.size(); ++k) out.data.labels[censored_rows[k]] = next[k];
    out.iterations = iter + 1;
    if (max_change < rel_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Model factory used by default for Schmee-Hahn imputation.
struct ForestRegressorFactory {
  ForestParams params;
  RegressionForestModel operator()(std::uint64_t seed) const {
    ForestParams p = params;
    p.seed = seed;
    return RegressionForestModel(p);
  }
};

/// Turns a survival dataset into point-regression labels.
template <typename Factory>
RegressionDataset apply_imputation(const SurvivalDataset& d, const ImputationStrategy& strategy, Factory&& factory,
                                   std::uint64_t seed) {
  strategy.validate();
  if (d.empty()) throw ArgumentError("apply_imputation: empty dataset");
  using Kind = ImputationStrategy::Kind;
  if (strategy.kind == Kind::SchmeeHahn)
    return schmee_hahn(d, std::forward<Factory>(factory), strategy.max_iter, strategy.rel_tol, seed).data;

  RegressionDataset out;
  out.x = FeatureMatrix(0, d.x.cols());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double label = d.times[i];
    if (d.censored[i]) {
      if (strategy.kind == Kind::Ignore) continue;
      label = strategy.kind == Kind::PAR10 ? 10.0 * d.cutoff : d.cutoff;
    }
    out.x.push_row(d.x.row(i));
    out.labels.push_back(label);
    out.source.push_back(i);
  }
  return out;
}

inline RegressionDataset apply_imputation(const SurvivalDataset& d, const ImputationStrategy& strategy,
                                          std::uint64_t seed, const ForestParams& params = {}) {
  return apply_imputation(d, strategy, ForestRegressorFactory{params}, seed);
}

}  // namespace survsel
