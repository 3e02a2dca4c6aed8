#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "survsel/errors.hpp"

namespace survsel {

/// Right-continuous piecewise-constant function on [0, inf).
///
/// values[j] holds on [knots[j], knots[j+1]); initial_value holds on
/// [0, knots[0]). Used both for cumulative hazards (initial 0, nondecreasing)
/// and survival functions (initial 1, nonincreasing, within [0, 1]).
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values, double initial_value)
      : knots_(std::move(knots)), values_(std::move(values)), initial_(initial_value) {
    if (knots_.size() != values_.size()) throw ArgumentError("step function: knots and values differ in length");
    for (std::size_t j = 1; j < knots_.size(); ++j)
      if (!(knots_[j - 1] < knots_[j])) throw ArgumentError("step function: knots must be strictly increasing");
  }

  static StepFunction constant(double value) { return StepFunction({}, {}, value); }

  std::span<const double> knots() const { return knots_; }
  std::span<const double> values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return knots_.size(); }

  double operator()(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

  /// Left limit f(t-).
  double left_limit(double t) const {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

  bool is_cumulative_hazard(double tol = 0.0) const {
    if (initial_ != 0.0) return false;
    double prev = 0.0;
    for (double v : values_) {
      if (!(v >= prev - tol) || !std::isfinite(v)) return false;
      prev = v;
    }
    return true;
  }

  bool is_survival(double tol = 0.0) const {
    if (initial_ != 1.0) return false;
    double prev = 1.0;
    for (double v : values_) {
      if (!(v <= prev + tol) || v < -tol || v > 1.0 + tol) return false;
      prev = v;
    }
    return true;
  }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

}  // namespace survsel
