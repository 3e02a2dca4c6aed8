#include <gtest/gtest.h>

#include "survsel/step_function.hpp"

using survsel::ArgumentError;
using survsel::StepFunction;

TEST(StepFunction, RightContinuousEvaluation) {
  const StepFunction f({2.0, 5.0}, {1.0 / 3.0, 4.0 / 3.0}, 0.0);
  EXPECT_EQ(f(0.0), 0.0);
  EXPECT_EQ(f(1.999), 0.0);
  EXPECT_EQ(f(2.0), 1.0 / 3.0);
  EXPECT_EQ(f(4.999), 1.0 / 3.0);
  EXPECT_EQ(f(5.0), 4.0 / 3.0);
  EXPECT_EQ(f(1e9), 4.0 / 3.0);
}

TEST(StepFunction, LeftLimit) {
  const StepFunction f({2.0, 5.0}, {0.7, 0.2}, 1.0);
  EXPECT_EQ(f.left_limit(2.0), 1.0);
  EXPECT_EQ(f.left_limit(5.0), 0.7);
  EXPECT_EQ(f.left_limit(6.0), 0.2);
}

TEST(StepFunction, RejectsBadKnots) {
  EXPECT_THROW(StepFunction({1.0, 1.0}, {0.1, 0.2}, 0.0), ArgumentError);
  EXPECT_THROW(StepFunction({2.0, 1.0}, {0.1, 0.2}, 0.0), ArgumentError);
  EXPECT_THROW(StepFunction({1.0}, {0.1, 0.2}, 0.0), ArgumentError);
}

TEST(StepFunction, ShapeChecks) {
  EXPECT_TRUE(StepFunction({1.0, 2.0}, {0.5, 0.5}, 0.0).is_cumulative_hazard());
  EXPECT_FALSE(StepFunction({1.0, 2.0}, {0.5, 0.4}, 0.0).is_cumulative_hazard());
  EXPECT_FALSE(StepFunction({1.0}, {0.5}, 0.1).is_cumulative_hazard());
  EXPECT_TRUE(StepFunction({1.0, 2.0}, {0.5, 0.0}, 1.0).is_survival());
  EXPECT_FALSE(StepFunction({1.0, 2.0}, {0.5, 0.6}, 1.0).is_survival());
  EXPECT_FALSE(StepFunction({1.0}, {-0.1}, 1.0).is_survival());
  EXPECT_TRUE(StepFunction({1.0}, {-1e-15}, 1.0).is_survival(1e-12));
  EXPECT_TRUE(StepFunction::constant(1.0).is_survival());
}
