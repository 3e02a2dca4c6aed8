#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "survsel/synthetic.hpp"
#include "survsel/tuning.hpp"

using namespace survsel;

namespace {

Scenario linked_scenario(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.algorithms = {"a", "b", "c"};
  spec.distributions = {RuntimeDistribution::log_normal(-0.5, 0.8), RuntimeDistribution::log_normal(-0.3, 0.6),
                        RuntimeDistribution::weibull(1.5, 0.7)};
  spec.feature_model = FeatureModel::Linked;
  spec.n_instances = n;
  spec.cutoff = 2.0;
  spec.seed = seed;
  return generate_synthetic(spec).scenario;
}

ForestParams small_survival_params() {
  ForestParams p = default_survival_params();
  p.n_trees = 10;
  return p;
}

}  // namespace

TEST(RadicalInverse, KnownValues) {
  EXPECT_EQ(radical_inverse(0, 2), 0.0);
  EXPECT_EQ(radical_inverse(1, 2), 0.5);
  EXPECT_EQ(radical_inverse(2, 2), 0.25);
  EXPECT_EQ(radical_inverse(3, 2), 0.75);
  EXPECT_EQ(radical_inverse(6, 2), 0.375);
  EXPECT_NEAR(radical_inverse(1, 3), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(radical_inverse(5, 3), 7.0 / 9.0, 1e-15);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const double v = radical_inverse(k, 5);
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ExpectedImprovement, Properties) {
  EXPECT_EQ(detail::expected_improvement(1.0, 2.0, 0.0), 0.0);
  EXPECT_EQ(detail::expected_improvement(2.0, 1.5, 0.0), 0.5);
  // At mean == best the value is sd * phi(0).
  EXPECT_NEAR(detail::expected_improvement(1.0, 1.0, 2.0), 2.0 / std::sqrt(2.0 * M_PI), 1e-12);
  double prev = 0.0;
  for (double sd : {0.1, 0.5, 1.0, 3.0}) {
    const double ei = detail::expected_improvement(1.0, 1.5, sd);
    EXPECT_GT(ei, prev);
    EXPECT_GE(ei, std::max(1.0 - 1.5, 0.0));
    prev = ei;
  }
  EXPECT_GT(detail::expected_improvement(1.0, 0.5, 1.0), detail::expected_improvement(1.0, 0.9, 1.0));
}

TEST(SurrogateDesign, DecodeStaysInRanges) {
  const SurrogateRanges r;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      const std::array<double, 3> u{i / 20.0, j / 20.0, (20 - j) / 20.0};
      const LossSpec l = detail::decode_surrogate(u);
      if (u[0] < 0.5) {
        ASSERT_EQ(l.kind, LossKind::Polynomial);
        EXPECT_GE(l.alpha, r.poly_alpha_min * (1 - 1e-12));
        EXPECT_LE(l.alpha, r.poly_alpha_max * (1 + 1e-12));
      } else {
        ASSERT_EQ(l.kind, LossKind::CappedLog);
        EXPECT_GE(l.alpha, r.log_alpha_min * (1 - 1e-12));
        EXPECT_LE(l.alpha, r.log_alpha_max);
        EXPECT_GE(l.beta, r.log_beta_min * (1 - 1e-12));
        EXPECT_LE(l.beta, r.log_beta_max * (1 + 1e-12));
      }
      const auto e = detail::encode_surrogate(u);
      ASSERT_EQ(e.size(), 5u);
      EXPECT_EQ(e[0] + e[1], 1.0);
    }
  EXPECT_NEAR(detail::decode_surrogate({0.0, 0.0, 0.0}).alpha, r.poly_alpha_min, 1e-12);
  EXPECT_NEAR(detail::decode_surrogate({0.0, 1.0, 0.0}).alpha, r.poly_alpha_max, 1e-9);
}

TEST(TuneSurrogate, BudgetAndDeterminism) {
  const Scenario s = linked_scenario(120, 1);
  TuneBudget b;
  b.n_evaluations = 2;
  b.seed = 4;
  const auto r = tune_surrogate(ScenarioView::all(s), b, small_survival_params());
  EXPECT_EQ(r.trace.size(), 2u);
  b.n_evaluations = 6;
  const auto a = tune_surrogate(ScenarioView::all(s), b, small_survival_params());
  const auto c = tune_surrogate(ScenarioView::all(s), b, small_survival_params(), SurvivalTransform::ProductLimit, 4);
  ASSERT_EQ(a.trace.size(), 6u);
  ASSERT_EQ(c.trace.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(a.trace[k].loss, c.trace[k].loss);
    EXPECT_EQ(a.trace[k].validation_par10, c.trace[k].validation_par10);
  }
  EXPECT_EQ(a.best, c.best);
  b.n_evaluations = 1;
  EXPECT_THROW(tune_surrogate(ScenarioView::all(s), b, small_survival_params()), ArgumentError);
}

TEST(TuneSurrogate, BestIsArgminOfTrace) {
  const Scenario s = linked_scenario(150, 2);
  TuneBudget b;
  b.n_evaluations = 8;
  b.seed = 9;
  const auto r = tune_surrogate(ScenarioView::all(s), b, small_survival_params());
  double lo = r.trace[0].validation_par10;
  for (const auto& e : r.trace) lo = std::min(lo, e.validation_par10);
  EXPECT_EQ(r.trace[r.best_index].validation_par10, lo);
  EXPECT_EQ(r.best, r.trace[r.best_index].loss);
  for (std::size_t k = 0; k < r.best_index; ++k) EXPECT_GT(r.trace[k].validation_par10, lo);
}

TEST(TuneSurrogate, UsesOnlyTrainingRows) {
  const Scenario s = linked_scenario(100, 3);
  ScenarioView train{&s, {}};
  for (std::size_t i = 0; i < 100; ++i)
    if (i % 4 != 0) train.rows.push_back(i);
  TuneBudget b;
  b.n_evaluations = 3;
  const auto r = tune_surrogate(train, b, small_survival_params());
  std::vector<std::size_t> all = r.inner_train_rows;
  all.insert(all.end(), r.validation_rows.begin(), r.validation_rows.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, train.rows);  // disjoint and exhaustive
  EXPECT_EQ(r.validation_rows.size(), 23u);  // round(0.3 * 75)
}

TEST(TuneSurrogate, ObjectiveMatchesDirectEvaluation) {
  const Scenario s = linked_scenario(120, 5);
  TuneBudget b;
  b.n_evaluations = 3;
  b.seed = 2;
  const ForestParams p = small_survival_params();
  const auto r = tune_surrogate(ScenarioView::all(s), b, p);
  const auto models =
      fit_survival_models(ScenarioView{&s, r.inner_train_rows}, p, SurvivalTransform::ProductLimit, mix_seed(2, 1), 1);
  for (const auto& entry : r.trace) {
    double total = 0;
    int n = 0;
    for (auto i : r.validation_rows) {
      if (s.unsolvable(i)) continue;
      std::vector<double> sc;
      for (const auto& m : models) sc.push_back(expected_loss(m.predict_survival(s.features.row(i)), entry.loss, s.cutoff));
      total += s.par10(i, argmin(sc));
      ++n;
    }
    EXPECT_NEAR(entry.validation_par10, total / n, 1e-12);
  }
}

TEST(TuneSurrogate, TraceCsv) {
  TuneResult r;
  r.trace = {{LossSpec::polynomial(2.0), 1.5}, {LossSpec::capped_log(0.5, 4.0), 0.25}};
  std::ostringstream os;
  write_trace_csv(os, r);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,family,alpha,beta,loss,validation_par10");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("\n0,poly,2,,"), std::string::npos);
  EXPECT_NE(text.find("\n1,log,0.5,4,"), std::string::npos);
}

TEST(TunedSelector, FitsWithChosenLoss) {
  const Scenario s = linked_scenario(120, 6);
  TuneBudget b;
  b.n_evaluations = 4;
  TunedSurvivalSelector sel(b, small_survival_params());
  ScenarioView train{&s, {}};
  for (std::size_t i = 0; i < 90; ++i) train.rows.push_back(i);
  sel.fit(train, 3);
  EXPECT_EQ(sel.tuning().trace.size(), 4u);
  EXPECT_EQ(sel.loss(), sel.tuning().best);
  EXPECT_EQ(sel.name(), "r2s_polylog");
  for (std::size_t i = 90; i < 120; ++i) EXPECT_LT(sel.select(s.features.row(i)), 3u);
}
