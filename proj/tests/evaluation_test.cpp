#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "survsel/evaluation.hpp"
#include "survsel/synthetic.hpp"

using namespace survsel;

namespace {

Scenario linked_scenario(std::size_t n, std::uint64_t seed, double feature_cost = 0.0) {
  SyntheticSpec spec;
  spec.name = "linked";
  spec.algorithms = {"a", "b", "c"};
  spec.distributions = {RuntimeDistribution::log_normal(-0.5, 0.8), RuntimeDistribution::log_normal(-0.3, 0.6),
                        RuntimeDistribution::weibull(1.5, 0.7)};
  spec.feature_model = FeatureModel::Linked;
  spec.n_instances = n;
  spec.cutoff = 2.0;
  spec.feature_cost = feature_cost;
  spec.seed = seed;
  return generate_synthetic(spec).scenario;
}

// Tiny hand-built scenario: 2 algorithms, cutoff 100.
Scenario hand_scenario() {
  Scenario s;
  s.name = "hand";
  s.algorithms = {"x", "y"};
  s.feature_names = {"f"};
  s.cutoff = 100;
  s.features = FeatureMatrix(0, 1);
  const double rt[4][2] = {{10, 50}, {20, 100}, {100, 5}, {30, 40}};
  const bool cens[4][2] = {{false, false}, {false, true}, {true, false}, {false, false}};
  for (int i = 0; i < 4; ++i) {
    s.instances.push_back("i" + std::to_string(i));
    s.features.push_row(std::vector<double>{static_cast<double>(i)});
    s.feature_costs.push_back(0.0);
    for (int a = 0; a < 2; ++a) {
      s.runtimes.push_back(rt[i][a]);
      s.censored.push_back(cens[i][a] ? 1 : 0);
    }
  }
  s.validate();
  return s;
}

EvaluationReport report(const std::string& scenario, const std::string& selector, double npar10) {
  EvaluationReport r;
  r.scenario = scenario;
  r.selector = selector;
  r.npar10 = npar10;
  return r;
}

}  // namespace

TEST(NormalizedPar10, Definition) {
  EXPECT_EQ(normalized_par10(5, 5, 9), 0.0);
  EXPECT_EQ(normalized_par10(9, 5, 9), 1.0);
  EXPECT_EQ(normalized_par10(7, 5, 9), 0.5);
  EXPECT_EQ(normalized_par10(5, 5, 5), 0.0);
  EXPECT_EQ(normalized_par10(6, 5, 5), std::numeric_limits<double>::infinity());
}

TEST(Charge, TimeoutsAndFeatureCost) {
  Scenario s = hand_scenario();
  auto r = charge(s, 1, 1, true);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.par10, 1000.0);
  s.feature_costs[0] = 95.0;
  r = charge(s, 0, 0, true);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.charged_time, 105.0);
  EXPECT_EQ(r.par10, 1000.0);
  r = charge(s, 0, 0, false);
  EXPECT_FALSE(r.timed_out);
  EXPECT_EQ(r.par10, 10.0);
  // Exactly at the cutoff is still solved.
  s.feature_costs[3] = 70.0;
  EXPECT_FALSE(charge(s, 3, 0, true).timed_out);
}

TEST(Evaluate, OraclesNormalizeToZeroAndOne) {
  const Scenario s = linked_scenario(150, 1);
  SelectorConfig c;
  c.kind = SelectorKind::VBS;
  const auto vbs = evaluate_selector(c, s, 5, 3);
  EXPECT_EQ(vbs.npar10, 0.0);
  EXPECT_EQ(vbs.par10, vbs.par10_vbs);
  c.kind = SelectorKind::SBS;
  const auto sbs = evaluate_selector(c, s, 5, 3);
  EXPECT_EQ(sbs.npar10, 1.0);
  for (const auto& f : sbs.folds) EXPECT_EQ(f.npar10, 1.0);
  EXPECT_EQ(sbs.failed_folds, 0u);
}

TEST(Evaluate, ReplayMatchesIndependentComputation) {
  const Scenario s = linked_scenario(200, 2, 0.05);
  const auto folds = make_folds(s, 4, 8);
  SelectorConfig c;
  c.kind = SelectorKind::SBS;
  const auto rep = evaluate_selector(c, s, 4, 8);
  double vbs_sum = 0, sbs_sum = 0;
  std::size_t n = 0;
  for (int f = 1; f <= 4; ++f) {
    std::vector<double> mean(3, 0.0);
    for (std::size_t i = 0; i < s.n_instances(); ++i)
      if (folds[i] != f)
        for (std::size_t a = 0; a < 3; ++a) mean[a] += s.par10(i, a);
    const std::size_t sbs = argmin(mean);
    for (std::size_t i = 0; i < s.n_instances(); ++i) {
      if (folds[i] != f || s.unsolvable(i)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < 3; ++a) best = std::min(best, s.par10(i, a));
      vbs_sum += best;
      sbs_sum += s.par10(i, sbs);
      ++n;
    }
  }
  ASSERT_EQ(rep.n_test, n);
  EXPECT_NEAR(rep.par10_vbs, vbs_sum / n, 1e-12);
  EXPECT_NEAR(rep.par10_sbs, sbs_sum / n, 1e-12);
  EXPECT_NEAR(rep.par10, sbs_sum / n, 1e-12);
}

TEST(Evaluate, UnsolvableInstancesAreNotTested) {
  Scenario s = linked_scenario(80, 3);
  for (std::size_t a = 0; a < 3; ++a) {
    s.runtimes[5 * 3 + a] = s.cutoff;
    s.censored[5 * 3 + a] = 1;
  }
  SelectorConfig c;
  c.kind = SelectorKind::SUNNY;
  const auto rep = evaluate_selector(c, s, 4, 1);
  std::size_t solvable = 0;
  for (std::size_t i = 0; i < s.n_instances(); ++i) solvable += s.unsolvable(i) ? 0 : 1;
  for (const auto& r : rep.instances) EXPECT_NE(r.instance, s.instances[5]);
  EXPECT_EQ(rep.n_test, solvable);
}

TEST(Evaluate, FailedFoldIsExcluded) {
  // Fold 1 trains on instances where every run timed out, so no best label is known.
  Scenario s = hand_scenario();
  for (std::size_t i = 2; i < 4; ++i)
    for (std::size_t a = 0; a < 2; ++a) {
      s.runtimes[i * 2 + a] = s.cutoff;
      s.censored[i * 2 + a] = 1;
    }
  s.folds = std::vector<int>{1, 1, 2, 2};
  SelectorConfig c;
  c.kind = SelectorKind::MultiClass;
  c.imputation = ImputationStrategy::ignore();
  const auto rep = evaluate_selector(c, s, 2, 1);
  ASSERT_EQ(rep.folds.size(), 2u);
  EXPECT_TRUE(rep.folds[0].failed);
  EXPECT_FALSE(rep.folds[0].error.empty());
  EXPECT_FALSE(rep.folds[1].failed);
  EXPECT_EQ(rep.failed_folds, 1u);
  EXPECT_EQ(rep.n_test, 0u);
  EXPECT_NE(rep.note.find("1 failed fold(s)"), std::string::npos);
}

TEST(Evaluate, SbsOptimalNote) {
  Scenario s = hand_scenario();
  // Make x best everywhere.
  for (std::size_t i = 0; i < 4; ++i) {
    s.runtimes[i * 2] = 1.0;
    s.censored[i * 2] = 0;
  }
  SelectorConfig c;
  c.kind = SelectorKind::SBS;
  const auto rep = evaluate_selector(c, s, 2, 0);
  EXPECT_EQ(rep.npar10, 0.0);
  EXPECT_EQ(rep.note, "SBS-optimal scenario");
}

TEST(Evaluate, DeterministicAcrossJobs) {
  const Scenario s = linked_scenario(120, 4);
  SelectorConfig c;
  c.kind = SelectorKind::R2SPAR10;
  c.survival_forest.n_trees = 10;
  const auto a = evaluate_selector(c, s, 3, 5, 1);
  c.jobs = 2;
  const auto b = evaluate_selector(c, s, 3, 5, 3);
  std::ostringstream x, y;
  write_instances_csv(x, {a});
  write_instances_csv(y, {b});
  EXPECT_EQ(x.str(), y.str());
  EXPECT_EQ(a.npar10, b.npar10);
}

TEST(AverageRanks, Ties) {
  EXPECT_EQ(average_ranks(std::vector<double>{0.3, 0.1, 0.3, 0.9}), (std::vector<double>{2.5, 1, 2.5, 4}));
  EXPECT_EQ(average_ranks(std::vector<double>{1, 1, 1}), (std::vector<double>{2, 2, 2}));
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(average_ranks(std::vector<double>{inf, 0.5}), (std::vector<double>{2, 1}));
}

TEST(Aggregate, MedianMeanAndRank) {
  const std::vector<EvaluationReport> reps{report("s1", "a", 0.2), report("s1", "b", 0.4), report("s2", "a", 0.8),
                                           report("s2", "b", 0.4), report("s3", "a", 0.1), report("s3", "b", 0.3)};
  const auto rows = aggregate(reps);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].selector, "a");
  EXPECT_NEAR(rows[0].mean_rank, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(rows[0].median_npar10, 0.2, 1e-12);
  EXPECT_NEAR(rows[0].mean_npar10, 1.1 / 3.0, 1e-12);
  EXPECT_NEAR(rows[1].mean_rank, 5.0 / 3.0, 1e-12);
  EXPECT_NEAR(rows[1].median_npar10, 0.4, 1e-12);
  EXPECT_EQ(rows[1].n_scenarios, 3u);
}

TEST(Aggregate, GapsAndDuplicatesAreErrors) {
  std::vector<EvaluationReport> reps{report("s1", "a", 0.2), report("s1", "b", 0.4), report("s2", "a", 0.8)};
  try {
    aggregate(reps);
    FAIL();
  } catch (const AggregationError& e) {
    EXPECT_NE(std::string(e.what()).find("b@s2"), std::string::npos);
  }
  reps.push_back(report("s2", "b", 0.1));
  reps.push_back(report("s2", "b", 0.3));
  EXPECT_THROW(aggregate(reps), AggregationError);
}

TEST(Reports, FormatNumber) {
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1000.0), "1000");
  std::ostringstream os;
  write_aggregate_csv(os, {AggregateRow{"a", 0.5, std::numeric_limits<double>::infinity(), 1.5, 2}});
  EXPECT_EQ(os.str(), "selector,median_npar10,mean_npar10,mean_rank,n_scenarios\na,0.5,inf,1.5,2\n");
  const auto j = aggregate_json({AggregateRow{"a", 0.5, std::numeric_limits<double>::infinity(), 1.5, 2}});
  EXPECT_EQ(j[0]["mean_npar10"], "inf");
  EXPECT_EQ(j[0]["median_npar10"], 0.5);
}
