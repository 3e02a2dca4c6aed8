#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/forest.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/parallel.hpp"
#include "survsel/scenario.hpp"
#include "survsel/selectors.hpp"
#include "survsel/survival_forest.hpp"

namespace survsel {

struct TraceEntry {
  LossSpec loss;
  double validation_par10 = 0.0;
};

struct TuneResult {
  LossSpec best;
  std::size_t best_index = 0;
  std::vector<TraceEntry> trace;
  /// Every candidate scored the same.
  bool degenerate = false;
  /// Scenario rows used for fitting and for scoring candidates.
  std::vector<std::size_t> inner_train_rows, validation_rows;
};

/// Radical-inverse (van der Corput) value of `index` in `base`.
inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

namespace detail {

/// Unit-cube point -> surrogate loss. u[0] picks the family; u[1], u[2] are
/// log-scaled parameter coordinates.
inline LossSpec decode_surrogate(const std::array<double, 3>& u, const SurrogateRanges& r = {}) {
  auto log_scale = [](double lo, double hi, double t) {
    return std::exp(std::log(lo) + std::clamp(t, 0.0, 1.0) * (std::log(hi) - std::log(lo)));
  };
  if (u[0] < 0.5) return LossSpec::polynomial(log_scale(r.poly_alpha_min, r.poly_alpha_max, u[1]));
  return LossSpec::capped_log(log_scale(r.log_alpha_min, r.log_alpha_max, u[1]),
                              log_scale(r.log_beta_min, r.log_beta_max, u[2]));
}

/// One-hot family plus per-family log-scaled parameters in [0, 1].
inline std::vector<double> encode_surrogate(const std::array<double, 3>& u) {
  const bool poly = u[0] < 0.5;
  return {poly ? 1.0 : 0.0, poly ? 0.0 : 1.0, poly ? u[1] : 0.0, poly ? 0.0 : u[1], poly ? 0.0 : u[2]};
}

inline double expected_improvement(double best, double mean, double sd) {
  if (!(sd > 0.0)) return std::max(best - mean, 0.0);
  const double z = (best - mean) / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return (best - mean) * cdf + sd * standard_normal_pdf(z);
}

}  // namespace detail

/// SMBO over {Polynomial(alpha), CappedLog(alpha, beta)}.
///
/// The training rows are split into inner-train and validation. One survival
/// model per algorithm is fitted once on inner-train; each candidate loss is
/// scored by the mean PAR10 (feature cost included) of its selections on the
/// solvable validation instances. A seeded, shifted Halton design covering
/// 10% of the budget is followed by expected-improvement proposals from a
/// regression-forest response surface.
inline TuneResult tune_surrogate(const ScenarioView& train, const TuneBudget& budget, const ForestParams& params,
                                 SurvivalTransform transform = SurvivalTransform::ProductLimit, int jobs = 1) {
  budget.validate();
  if (train.scenario == nullptr || train.size() < 2)
    throw ArgumentError("tune_surrogate: need at least 2 training instances");
  const Scenario& s = train.base();
  const std::size_t m = s.n_algorithms();
  std::mt19937_64 rng(budget.seed);

  TuneResult out;
  std::vector<std::size_t> order = train.rows;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(budget.inner_validation_fraction * static_cast<double>(order.size()))), 1,
      order.size() - 1);
  out.validation_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.inner_train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.validation_rows.begin(), out.validation_rows.end());
  std::sort(out.inner_train_rows.begin(), out.inner_train_rows.end());

  const auto models =
      fit_survival_models(ScenarioView{&s, out.inner_train_rows}, params, transform, mix_seed(budget.seed, 1), jobs);

  // Predicted survival functions are loss-independent; compute them once.
  std::vector<std::size_t> scored;
  for (auto i : out.validation_rows)
    if (!s.unsolvable(i)) scored.push_back(i);
  std::vector<std::vector<StepFunction>> sfs(scored.size());
  parallel_for(scored.size(), jobs, [&](std::size_t k) {
    for (std::size_t a = 0; a < m; ++a) sfs[k].push_back(models[a].predict_survival(s.features.row(scored[k])));
  });

  auto objective = [&](const LossSpec& loss) {
    if (scored.empty()) return 0.0;
    double total = 0.0;
    std::vector<double> scores(m);
    for (std::size_t k = 0; k < scored.size(); ++k) {
      for (std::size_t a = 0; a < m; ++a) scores[a] = expected_loss(sfs[k][a], loss, s.cutoff);
      const std::size_t i = scored[k], a = argmin(scores);
      const double charged = s.feature_costs[i] + s.runtime(i, a);
      total += (s.is_censored(i, a) || charged > s.cutoff) ? 10.0 * s.cutoff : charged;
    }
    return total / static_cast<double>(scored.size());
  };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::array<double, 3> shift{unit(rng), unit(rng), unit(rng)};
  const std::size_t n_init =
      std::clamp<std::size_t>((budget.n_evaluations + 9) / 10, 1, budget.n_evaluations);
  std::vector<std::array<double, 3>> points;
  for (std::size_t k = 1; k <= n_init; ++k) {
    std::array<double, 3> u{};
    const std::uint64_t bases[3] = {2, 3, 5};
    for (int j = 0; j < 3; ++j) u[j] = std::fmod(radical_inverse(k, bases[j]) + shift[j], 1.0);
    points.push_back(u);
  }
  std::vector<double> values(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t k) { values[k] = objective(detail::decode_surrogate(points[k])); });

  while (points.size() < budget.n_evaluations) {
    FeatureMatrix x(0, 5);
    for (const auto& p : points) x.push_row(detail::encode_surrogate(p));
    ForestParams sp;
    sp.n_trees = 50;
    sp.max_features = static_cast<double>(x.cols());  // every feature at every split
    sp.seed = mix_seed(budget.seed, 100 + points.size());
    RegressionForestModel surface(sp);
    surface.fit(x, values);

    const std::size_t incumbent = argmin(values);
    const double best = values[incumbent];
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::array<double, 3> chosen = points[incumbent];
    double chosen_ei = -1.0;
    for (std::size_t c = 0; c < 550; ++c) {
      std::array<double, 3> u{};
      if (c < 500) {
        for (double& e : u) e = unit(rng);
      } else {
        u = points[incumbent];
        u[1] = std::clamp(u[1] + jitter(rng), 0.0, 1.0);
        u[2] = std::clamp(u[2] + jitter(rng), 0.0, 1.0);
      }
      const MeanVariance mv = surface.predict_mean_variance(detail::encode_surrogate(u));
      const double ei = detail::expected_improvement(best, mv.mean, std::sqrt(std::max(mv.variance, 0.0)));
      if (ei > chosen_ei) {
        chosen_ei = ei;
        chosen = u;
      }
    }
    points.push_back(chosen);
    values.push_back(objective(detail::decode_surrogate(chosen)));
  }

  for (std::size_t k = 0; k < points.size(); ++k) out.trace.push_back({detail::decode_surrogate(points[k]), values[k]});
  out.best_index = argmin(values);
  out.best = out.trace[out.best_index].loss;
  out.degenerate = std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
  if (out.degenerate) log::info("tuning: all candidates scored ", values.front(), "; keeping the first candidate");
  return out;
}

/// index,family,alpha,beta,loss,validation_par10
inline void write_trace_csv(std::ostream& os, const TuneResult& r) {
  os << "index,family,alpha,beta,loss,validation_par10\n";
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    const auto& e = r.trace[k];
    const bool poly = e.loss.kind == LossKind::Polynomial;
    os << k << ',' << (poly ? "poly" : "log") << ',' << detail::format_double(e.loss.alpha) << ','
       << (poly ? std::string() : detail::format_double(e.loss.beta)) << ',' << to_string(e.loss) << ','
       << detail::format_double(e.validation_par10) << '\n';
  }
}

/// Survival-forest selector with a surrogate loss chosen on the training data.
class TunedSurvivalSelector : public SurvivalSelector {
 public:
  TunedSurvivalSelector(TuneBudget budget, ForestParams params,
                        SurvivalTransform transform = SurvivalTransform::ProductLimit, int jobs = 1)
      : SurvivalSelector("r2s_polylog", LossSpec::polynomial(1.0), params, transform, jobs), budget_(budget) {}

  void fit(const ScenarioView& train, std::uint64_t seed) override {
    TuneBudget b = budget_;
    b.seed = mix_seed(seed, budget_.seed);
    result_ = tune_surrogate(train, b, params_, transform_, jobs_);
    set_loss(result_.best);
    SurvivalSelector::fit(train, seed);
  }

  const TuneResult& tuning() const { return result_; }

 private:
  TuneBudget budget_;
  TuneResult result_;
};

/// Builds an unfitted selector. VBS is an evaluation oracle and has no selector.
inline std::unique_ptr<Selector> make_selector(const SelectorConfig& c) {
  c.validate();
  const ImputationStrategy imp = c.effective_imputation();
  switch (c.kind) {
    case SelectorKind::R2SExp:
      return std::make_unique<SurvivalSelector>("r2s_exp", LossSpec::identity(), c.survival_forest, c.transform, c.jobs);
    case SelectorKind::R2SPAR10:
      return std::make_unique<SurvivalSelector>("r2s_par10", LossSpec::par10(), c.survival_forest, c.transform, c.jobs);
    case SelectorKind::R2SLoss:
      return std::make_unique<SurvivalSelector>("r2s_loss", c.loss, c.survival_forest, c.transform, c.jobs);
    case SelectorKind::R2SPolyLog:
      return std::make_unique<TunedSurvivalSelector>(c.tuning, c.survival_forest, c.transform, c.jobs);
    case SelectorKind::PerAlgorithmRegressor: return std::make_unique<PerAlgorithmRegressor>(imp, c.forest, c.jobs);
    case SelectorKind::MultiClass: return std::make_unique<MultiClassSelector>(imp, c.forest, c.jobs);
    case SelectorKind::SUNNY: return std::make_unique<SunnySelector>(c.sunny_k, imp, c.forest, c.jobs);
    case SelectorKind::ISAC: return std::make_unique<IsacSelector>(c.isac_max_clusters, imp, c.forest, c.jobs);
    case SelectorKind::SATzilla11: return std::make_unique<Satzilla11Selector>(imp, c.forest, c.jobs);
    case SelectorKind::SBS: return std::make_unique<SBSSelector>();
    case SelectorKind::VBS: break;
  }
  throw ArgumentError("vbs is an evaluation oracle, not a trainable selector");
}

}  // namespace survsel
