#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survsel/censoring.hpp"
#include "survsel/errors.hpp"
#include "survsel/features.hpp"
#include "survsel/forest.hpp"
#include "survsel/gmeans.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/parallel.hpp"
#include "survsel/scenario.hpp"
#include "survsel/survival_forest.hpp"

namespace survsel {

/// Fitted per-instance algorithm selector.
class Selector {
 public:
  virtual ~Selector() = default;
  virtual std::string name() const = 0;
  virtual void fit(const ScenarioView& train, std::uint64_t seed) = 0;
  /// One score per algorithm; lower is better.
  virtual std::vector<double> score(std::span<const double> x) const = 0;
  /// argmin of score(x); ties go to the lowest algorithm index.
  virtual std::size_t select(std::span<const double> x) const { return argmin(score(x)); }
  /// False for selectors that never look at instance features (no feature cost charged).
  virtual bool uses_features() const { return true; }
};

enum class SelectorKind {
  R2SExp,
  R2SPAR10,
  R2SPolyLog,
  R2SLoss,  // fixed user-supplied loss
  PerAlgorithmRegressor,
  MultiClass,
  SUNNY,
  ISAC,
  SATzilla11,
  SBS,
  VBS,  // evaluation-only oracle
};

inline std::string to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::R2SExp: return "r2s_exp";
    case SelectorKind::R2SPAR10: return "r2s_par10";
    case SelectorKind::R2SPolyLog: return "r2s_polylog";
    case SelectorKind::R2SLoss: return "r2s_loss";
    case SelectorKind::PerAlgorithmRegressor: return "per_algorithm_regressor";
    case SelectorKind::MultiClass: return "multiclass";
    case SelectorKind::SUNNY: return "sunny";
    case SelectorKind::ISAC: return "isac";
    case SelectorKind::SATzilla11: return "satzilla11";
    case SelectorKind::SBS: return "sbs";
    case SelectorKind::VBS: return "vbs";
  }
  return "";
}

inline SelectorKind parse_selector_kind(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '-' || c == '\'') c = '_';
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "multiclassselector") key = "multiclass";
  if (key == "perallgorithmregressor" || key == "peralgorithmregressor") key = "per_algorithm_regressor";
  if (key == "satzilla_11" || key == "satzilla") key = "satzilla11";
  for (int k = 0; k <= static_cast<int>(SelectorKind::VBS); ++k)
    if (to_string(static_cast<SelectorKind>(k)) == key) return static_cast<SelectorKind>(k);
  throw ArgumentError("unknown selector '" + std::string(text) + "'");
}

inline bool is_survival_kind(SelectorKind k) {
  return k == SelectorKind::R2SExp || k == SelectorKind::R2SPAR10 || k == SelectorKind::R2SPolyLog ||
         k == SelectorKind::R2SLoss;
}

/// Budget of the surrogate-loss search used by R2S_PolyLog.
struct TuneBudget {
  std::size_t n_evaluations = 50;
  double inner_validation_fraction = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_evaluations < 2) throw ArgumentError("tuning: n_evaluations must be >= 2");
    if (!(inner_validation_fraction > 0.0 && inner_validation_fraction < 1.0))
      throw ArgumentError("tuning: inner_validation_fraction must lie in (0, 1)");
  }
};

struct SelectorConfig {
  SelectorKind kind = SelectorKind::R2SPAR10;
  /// Baselines only; unset means the per-kind default.
  std::optional<ImputationStrategy> imputation;
  ForestParams forest;
  ForestParams survival_forest = default_survival_params();
  SurvivalTransform transform = SurvivalTransform::ProductLimit;
  LossSpec loss = LossSpec::par10();  // R2SLoss only
  std::size_t sunny_k = 16;
  std::size_t isac_max_clusters = 16;
  TuneBudget tuning;
  /// Parallel model fits (algorithms / pairs); results do not depend on it.
  int jobs = 1;

  void validate() const {
    if (sunny_k < 1) throw ArgumentError("selector: sunny k must be >= 1");
    if (isac_max_clusters < 1) throw ArgumentError("selector: isac max_clusters must be >= 1");
    forest.validate();
    survival_forest.validate();
    if (imputation) imputation->validate();
    if (kind == SelectorKind::R2SPolyLog) tuning.validate();
  }

  ImputationStrategy effective_imputation() const {
    if (imputation) return *imputation;
    return kind == SelectorKind::ISAC ? ImputationStrategy::par10() : ImputationStrategy::cutoff_runtime();
  }
};

// ---------------------------------------------------------------------------
// Shared training helpers.

namespace detail {

inline void require_training(const ScenarioView& v, std::string_view who) {
  if (v.scenario == nullptr || v.empty()) throw ArgumentError(std::string(who) + ": empty training set");
}

struct TrainingFeatures {
  FeatureMatrix x;
  std::vector<double> medians;
};

inline TrainingFeatures training_features(const ScenarioView& v) {
  TrainingFeatures t;
  t.x = FeatureMatrix(0, v.base().n_features());
  for (auto i : v.rows) t.x.push_row(v.base().features.row(i));
  t.medians = column_medians(t.x);
  impute_missing(t.x, t.medians);
  return t;
}

/// Mean training PAR10 per algorithm.
inline std::vector<double> mean_par10(const ScenarioView& v) {
  const Scenario& s = v.base();
  std::vector<double> mean(s.n_algorithms(), 0.0);
  for (auto i : v.rows)
    for (std::size_t a = 0; a < s.n_algorithms(); ++a) mean[a] += s.par10(i, a);
  for (double& m : mean) m /= static_cast<double>(v.size());
  return mean;
}

/// Position of each algorithm in the SBS ordering (0 = best; ties by index).
inline std::vector<std::size_t> sbs_ranks(std::span<const double> mean) {
  std::vector<std::size_t> order(mean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] < mean[b]; });
  std::vector<std::size_t> rank(mean.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

/// Imputed labels for every (training row, algorithm), row-major over
/// v.rows; NaN marks runs dropped by the Ignore strategy.
inline std::vector<double> imputed_labels(const ScenarioView& v, const ImputationStrategy& strategy,
                                          const ForestParams& params, std::uint64_t seed, int jobs) {
  const Scenario& s = v.base();
  const std::size_t n = v.size(), m = s.n_algorithms();
  std::vector<double> labels(n * m, kMissing);
  parallel_for(m, jobs, [&](std::size_t a) {
    const SurvivalDataset d = build_survival_dataset(v, a);
    RegressionDataset r;
    try {
      r = apply_imputation(d, strategy, mix_seed(seed, a), params);
    } catch (const DegenerateDataError&) {
      log::warn("imputation: algorithm ", s.algorithms[a], " has no uncensored training runs; using the cutoff");
      r = apply_imputation(d, ImputationStrategy::cutoff_runtime(), mix_seed(seed, a), params);
    }
    for (std::size_t k = 0; k < r.labels.size(); ++k) labels[r.source[k] * m + a] = r.labels[k];
  });
  return labels;
}

inline double nan_to(double v, double fallback) { return is_missing(v) ? fallback : v; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Survival-forest selector.

/// One survival model per algorithm on the training rows.
inline std::vector<SurvivalModel> fit_survival_models(const ScenarioView& v, const ForestParams& params,
                                                      SurvivalTransform transform, std::uint64_t seed, int jobs) {
  detail::require_training(v, "survival selector");
  const std::size_t m = v.base().n_algorithms();
  std::vector<SurvivalModel> models(m);
  parallel_for(m, jobs, [&](std::size_t a) {
    ForestParams p = params;
    p.seed = mix_seed(seed, a);
    p.jobs = 1;
    models[a] = SurvivalModel::fit(build_survival_dataset(v, a), p, transform);
  });
  return models;
}

/// Scores every algorithm by the expected loss of its predicted runtime distribution.
class SurvivalSelector : public Selector {
 public:
  SurvivalSelector(std::string name, LossSpec loss, ForestParams params,
                   SurvivalTransform transform = SurvivalTransform::ProductLimit, int jobs = 1)
      : name_(std::move(name)), loss_(loss), params_(params), transform_(transform), jobs_(jobs) {}

  std::string name() const override { return name_; }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    models_ = fit_survival_models(train, params_, transform_, seed, jobs_);
    cutoff_ = train.base().cutoff;
  }

  std::vector<double> score(std::span<const double> x) const override { return score_with(x, loss_); }

  std::vector<double> score_with(std::span<const double> x, const LossSpec& loss) const {
    std::vector<double> out(models_.size());
    for (std::size_t a = 0; a < models_.size(); ++a)
      out[a] = expected_loss(models_[a].predict_survival(x), loss, cutoff_);
    return out;
  }

  const LossSpec& loss() const { return loss_; }
  void set_loss(const LossSpec& loss) { loss_ = loss; }
  const std::vector<SurvivalModel>& models() const { return models_; }

 protected:
  std::string name_;
  LossSpec loss_;
  ForestParams params_;
  SurvivalTransform transform_;
  int jobs_;
  std::vector<SurvivalModel> models_;
  double cutoff_ = 0.0;
};

// ---------------------------------------------------------------------------
// Baselines.

class SBSSelector : public Selector {
 public:
  std::string name() const override { return "sbs"; }
  bool uses_features() const override { return false; }
  void fit(const ScenarioView& train, std::uint64_t) override {
    detail::require_training(train, "sbs");
    mean_ = detail::mean_par10(train);
  }
  std::vector<double> score(std::span<const double>) const override { return mean_; }
  std::size_t choice() const { return argmin(mean_); }

 private:
  std::vector<double> mean_;
};

class PerAlgorithmRegressor : public Selector {
 public:
  PerAlgorithmRegressor(ImputationStrategy imputation, ForestParams params, int jobs = 1)
      : imputation_(imputation), params_(params), jobs_(jobs) {}
  std::string name() const override { return "per_algorithm_regressor"; }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    detail::require_training(train, name());
    const Scenario& s = train.base();
    const std::size_t m = s.n_algorithms();
    forests_.assign(m, RegressionForest{});
    fallback_.assign(m, std::nullopt);
    parallel_for(m, jobs_, [&](std::size_t a) {
      const SurvivalDataset d = build_survival_dataset(train, a);
      RegressionDataset r;
      try {
        r = apply_imputation(d, imputation_, mix_seed(seed, 2 * a), params_);
      } catch (const DegenerateDataError&) {
        r = apply_imputation(d, ImputationStrategy::cutoff_runtime(), 0, params_);
      }
      if (r.labels.empty()) {
        fallback_[a] = 10.0 * s.cutoff;
        return;
      }
      ForestParams p = params_;
      p.seed = mix_seed(seed, 2 * a + 1);
      p.jobs = 1;
      std::vector<double> w(r.labels.size(), 1.0);
      forests_[a] = fit_forest(r.x, VarianceCriterion(r.labels, w), p);
    });
  }

  std::vector<double> score(std::span<const double> x) const override {
    std::vector<double> out(forests_.size());
    for (std::size_t a = 0; a < out.size(); ++a)
      out[a] = fallback_[a] ? *fallback_[a] : predict_regression(forests_[a], x);
    return out;
  }

 private:
  ImputationStrategy imputation_;
  ForestParams params_;
  int jobs_;
  std::vector<RegressionForest> forests_;
  std::vector<std::optional<double>> fallback_;
};

class MultiClassSelector : public Selector {
 public:
  MultiClassSelector(ImputationStrategy imputation, ForestParams params, int jobs = 1)
      : imputation_(imputation), params_(params), jobs_(jobs) {}
  std::string name() const override { return "multiclass"; }

  /// Per-row best algorithm from a label matrix (NaN = unknown); -1 if every label is unknown.
  static std::vector<int> best_labels(std::span<const double> labels, std::size_t m) {
    std::vector<int> out(labels.size() / m, -1);
    for (std::size_t r = 0; r < out.size(); ++r) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < m; ++a) {
        const double v = labels[r * m + a];
        if (!is_missing(v) && v < best) {
          best = v;
          out[r] = static_cast<int>(a);
        }
      }
    }
    return out;
  }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    detail::require_training(train, name());
    const std::size_t m = train.base().n_algorithms();
    const auto labels = detail::imputed_labels(train, imputation_, params_, mix_seed(seed, 0), jobs_);
    const auto best = best_labels(labels, m);
    const auto feats = detail::training_features(train);
    FeatureMatrix x(0, feats.x.cols());
    std::vector<std::uint32_t> y;
    for (std::size_t r = 0; r < best.size(); ++r) {
      if (best[r] < 0) continue;
      x.push_row(feats.x.row(r));
      y.push_back(static_cast<std::uint32_t>(best[r]));
    }
    if (y.empty()) throw DegenerateDataError("multiclass: no training instance has a known best algorithm");
    std::vector<double> w(y.size(), 1.0);
    ForestParams p = params_;
    p.seed = mix_seed(seed, 1);
    p.jobs = jobs_;
    forest_ = fit_forest(x, GiniCriterion(y, m, w), p);
  }

  std::vector<double> score(std::span<const double> x) const override {
    auto probs = predict_class_probs(forest_, x);
    for (double& p : probs) p = -p;
    return probs;
  }

 private:
  ImputationStrategy imputation_;
  ForestParams params_;
  int jobs_;
  ClassificationForest forest_;
};

class SunnySelector : public Selector {
 public:
  SunnySelector(std::size_t k, ImputationStrategy imputation, ForestParams params, int jobs = 1)
      : k_(k), imputation_(imputation), params_(params), jobs_(jobs) {
    if (k_ < 1) throw ArgumentError("sunny: k must be >= 1");
  }
  std::string name() const override { return "sunny"; }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    detail::require_training(train, name());
    m_ = train.base().n_algorithms();
    timeout_ = 10.0 * train.base().cutoff;
    labels_ = detail::imputed_labels(train, imputation_, params_, seed, jobs_);
    auto feats = detail::training_features(train);
    medians_ = std::move(feats.medians);
    x_ = std::move(feats.x);
    const std::size_t n = x_.rows(), d = x_.cols();
    mean_.assign(d, 0.0);
    scale_.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean_[j] += x_(i, j) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) scale_[j] += (x_(i, j) - mean_[j]) * (x_(i, j) - mean_[j]);
    for (double& s : scale_) {
      s = std::sqrt(s / static_cast<double>(n));
      if (!(s > 0.0)) s = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) x_(i, j) = (x_(i, j) - mean_[j]) / scale_[j];
    k_eff_ = k_;
    if (k_eff_ > n) {
      log::warn("sunny: k = ", k_, " exceeds ", n, " training instances; using k = ", n);
      k_eff_ = n;
    }
  }

  std::vector<double> score(std::span<const double> x) const override {
    auto q = impute_missing(x, medians_);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = (q[j] - mean_[j]) / scale_[j];
    std::vector<std::pair<double, std::size_t>> dist(x_.rows());
    for (std::size_t i = 0; i < x_.rows(); ++i) dist[i] = {detail::squared_distance(x_.row(i), q), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff_), dist.end());
    std::vector<double> sum(m_, 0.0), count(m_, 0.0);
    for (std::size_t r = 0; r < k_eff_; ++r)
      for (std::size_t a = 0; a < m_; ++a) {
        const double v = labels_[dist[r].second * m_ + a];
        if (is_missing(v)) continue;
        sum[a] += v;
        count[a] += 1.0;
      }
    std::vector<double> out(m_);
    for (std::size_t a = 0; a < m_; ++a) out[a] = count[a] > 0.0 ? sum[a] / count[a] : timeout_;
    return out;
  }

  std::size_t effective_k() const { return k_eff_; }

 private:
  std::size_t k_, k_eff_ = 0, m_ = 0;
  ImputationStrategy imputation_;
  ForestParams params_;
  int jobs_;
  double timeout_ = 0.0;
  FeatureMatrix x_;
  std::vector<double> labels_, medians_, mean_, scale_;
};

class IsacSelector : public Selector {
 public:
  IsacSelector(std::size_t max_clusters, ImputationStrategy imputation, ForestParams params, int jobs = 1)
      : max_clusters_(max_clusters), imputation_(imputation), params_(params), jobs_(jobs) {
    if (max_clusters_ < 1) throw ArgumentError("isac: max_clusters must be >= 1");
  }
  std::string name() const override { return "isac"; }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    detail::require_training(train, name());
    const std::size_t m = train.base().n_algorithms();
    const auto labels = detail::imputed_labels(train, imputation_, params_, mix_seed(seed, 0), jobs_);
    auto feats = detail::training_features(train);
    medians_ = std::move(feats.medians);
    FeatureMatrix x = std::move(feats.x);
    const std::size_t n = x.rows(), d = x.cols();
    lo_.assign(d, std::numeric_limits<double>::infinity());
    hi_.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        lo_[j] = std::min(lo_[j], x(i, j));
        hi_[j] = std::max(hi_[j], x(i, j));
      }
    for (std::size_t i = 0; i < n; ++i) scale_row(x.row(i));
    const Clustering c = gmeans(x, max_clusters_, 2 * d, mix_seed(seed, 1));
    centers_ = c.centers;
    cluster_scores_.assign(centers_.size(), std::vector<double>(m, 0.0));
    std::vector<std::vector<double>> count(centers_.size(), std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < m; ++a) {
        const double v = labels[i * m + a];
        if (is_missing(v)) continue;
        cluster_scores_[c.assignment[i]][a] += v;
        count[c.assignment[i]][a] += 1.0;
      }
    for (std::size_t k = 0; k < centers_.size(); ++k)
      for (std::size_t a = 0; a < m; ++a)
        cluster_scores_[k][a] = count[k][a] > 0.0 ? cluster_scores_[k][a] / count[k][a]
                                                  : std::numeric_limits<double>::infinity();
  }

  std::vector<double> score(std::span<const double> x) const override {
    auto q = impute_missing(x, medians_);
    scale_row(q);
    return cluster_scores_[detail::nearest(centers_, q)];
  }

  std::size_t n_clusters() const { return centers_.size(); }

 private:
  void scale_row(std::span<double> row) const {
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double range = hi_[j] - lo_[j];
      row[j] = range > 0.0 ? 2.0 * (row[j] - lo_[j]) / range - 1.0 : 0.0;
    }
  }

  std::size_t max_clusters_;
  ImputationStrategy imputation_;
  ForestParams params_;
  int jobs_;
  std::vector<double> medians_, lo_, hi_;
  std::vector<std::vector<double>> centers_, cluster_scores_;
};

/// Pairwise cost-sensitive voting (core of SATzilla'11, without pre-solvers).
class Satzilla11Selector : public Selector {
 public:
  Satzilla11Selector(ImputationStrategy imputation, ForestParams params, int jobs = 1)
      : imputation_(imputation), params_(params), jobs_(jobs) {}
  std::string name() const override { return "satzilla11"; }

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    detail::require_training(train, name());
    m_ = train.base().n_algorithms();
    rank_ = detail::sbs_ranks(detail::mean_par10(train));
    const auto labels = detail::imputed_labels(train, imputation_, params_, mix_seed(seed, 0), jobs_);
    const auto feats = detail::training_features(train);
    pairs_.clear();
    for (std::size_t a = 0; a < m_; ++a)
      for (std::size_t b = a + 1; b < m_; ++b) pairs_.push_back({a, b, false, {}});
    parallel_for(pairs_.size(), jobs_, [&](std::size_t k) {
      Pair& pr = pairs_[k];
      FeatureMatrix x(0, feats.x.cols());
      std::vector<std::uint32_t> y;
      std::vector<double> w;
      for (std::size_t r = 0; r < feats.x.rows(); ++r) {
        const double la = labels[r * m_ + pr.a], lb = labels[r * m_ + pr.b];
        if (is_missing(la) || is_missing(lb) || la == lb) continue;
        x.push_row(feats.x.row(r));
        y.push_back(la < lb ? 0u : 1u);
        w.push_back(std::abs(la - lb));
      }
      if (y.empty()) return;
      ForestParams p = params_;
      p.seed = mix_seed(seed, k + 1);
      p.jobs = 1;
      pr.forest = fit_forest(x, GiniCriterion(y, 2, w), p);
      pr.fitted = true;
    });
  }

  std::vector<double> score(std::span<const double> x) const override {
    std::vector<double> wins(m_, 0.0);
    for (const Pair& pr : pairs_) {
      std::size_t winner = rank_[pr.a] < rank_[pr.b] ? pr.a : pr.b;
      if (pr.fitted) {
        const auto probs = predict_class_probs(pr.forest, x);
        if (probs[0] > probs[1]) winner = pr.a;
        else if (probs[1] > probs[0]) winner = pr.b;
      }
      wins[winner] += 1.0;
    }
    std::vector<double> out(m_);
    for (std::size_t a = 0; a < m_; ++a)
      out[a] = -wins[a] + static_cast<double>(rank_[a]) / static_cast<double>(m_);
    return out;
  }

 private:
  struct Pair {
    std::size_t a, b;
    bool fitted;
    ClassificationForest forest;
  };
  ImputationStrategy imputation_;
  ForestParams params_;
  int jobs_;
  std::size_t m_ = 0;
  std::vector<std::size_t> rank_;
  std::vector<Pair> pairs_;
};

/// Per-instance oracle over recorded runs: the algorithm with the lowest PAR10.
inline std::size_t vbs_choice(const Scenario& s, std::size_t i) {
  std::vector<double> scores(s.n_algorithms());
  for (std::size_t a = 0; a < scores.size(); ++a) scores[a] = s.par10(i, a);
  return argmin(scores);
}

}  // namespace survsel
