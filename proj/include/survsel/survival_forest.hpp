#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "survsel/censoring.hpp"
#include "survsel/errors.hpp"
#include "survsel/forest.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/step_function.hpp"

namespace survsel {

/// Nelson-Aalen cumulative hazard of the selected samples (indices may
/// repeat; each occurrence counts once): H(t) = sum over event times
/// t_i <= t of d_i / Y_i.
inline StepFunction nelson_aalen(std::span<const double> times, std::span<const std::uint8_t> censored,
                                 std::span<const std::uint32_t> members) {
  std::vector<std::pair<double, std::uint8_t>> obs;
  obs.reserve(members.size());
  for (auto i : members) obs.emplace_back(times[i], censored[i]);
  std::sort(obs.begin(), obs.end());
  std::vector<double> knots, values;
  double at_risk = static_cast<double>(obs.size());
  double cumulative = 0.0;
  for (std::size_t k = 0; k < obs.size();) {
    const double t = obs[k].first;
    double deaths = 0, leaving = 0;
    for (; k < obs.size() && obs[k].first == t; ++k) {
      ++leaving;
      if (!obs[k].second) ++deaths;
    }
    if (deaths > 0) {
      cumulative += deaths / at_risk;
      knots.push_back(t);
      values.push_back(cumulative);
    }
    at_risk -= leaving;
  }
  return StepFunction(std::move(knots), std::move(values), 0.0);
}

inline StepFunction nelson_aalen(std::span<const SurvivalSample> samples) {
  if (samples.empty()) throw ArgumentError("nelson_aalen: no samples");
  std::vector<double> t;
  std::vector<std::uint8_t> c;
  std::vector<std::uint32_t> idx;
  for (const auto& s : samples) {
    idx.push_back(static_cast<std::uint32_t>(t.size()));
    t.push_back(s.y);
    c.push_back(s.delta ? 1 : 0);
  }
  return nelson_aalen(t, c, idx);
}

/// S(t) = exp(-H(t)) on the knots of H.
inline StepFunction chf_to_survival(const StepFunction& chf) {
  std::vector<double> values(chf.size());
  for (std::size_t j = 0; j < chf.size(); ++j) values[j] = std::exp(-chf.values()[j]);
  return StepFunction(std::vector<double>(chf.knots().begin(), chf.knots().end()), std::move(values),
                      std::exp(-chf.initial_value()));
}

/// Product-limit conversion S(t) = prod over knots t_j <= t of (1 - dH_j).
/// Equals the Kaplan-Meier estimate when H is a Nelson-Aalen estimate.
inline StepFunction chf_to_survival_product_limit(const StepFunction& chf) {
  std::vector<double> values(chf.size());
  double prev_h = chf.initial_value(), s = 1.0;
  for (std::size_t j = 0; j < chf.size(); ++j) {
    const double jump = chf.values()[j] - prev_h;
    s *= std::clamp(1.0 - jump, 0.0, 1.0);
    values[j] = s;
    prev_h = chf.values()[j];
  }
  return StepFunction(std::vector<double>(chf.knots().begin(), chf.knots().end()), std::move(values), 1.0);
}

/// How an ensemble cumulative hazard is turned into a survival function.
enum class SurvivalTransform { Exponential, ProductLimit };

/// Log-rank splitting with Nelson-Aalen leaves.
class SurvivalCriterion : public LogRankSplit {
 public:
  using Leaf = StepFunction;
  static constexpr std::string_view tag = "survival";
  using LogRankSplit::LogRankSplit;

  Leaf make_leaf(std::span<const std::uint32_t> node) const { return nelson_aalen(times(), censored(), node); }

  static void write_leaf(std::ostream& os, const Leaf& leaf) {
    os << leaf.size();
    for (std::size_t j = 0; j < leaf.size(); ++j) os << ' ' << leaf.knots()[j] << ' ' << leaf.values()[j];
  }
  static Leaf read_leaf(std::istream& is) {
    std::size_t k = 0;
    is >> k;
    std::vector<double> knots(k), values(k);
    for (std::size_t j = 0; j < k; ++j) is >> knots[j] >> values[j];
    return StepFunction(std::move(knots), std::move(values), 0.0);
  }
};

using SurvivalForest = Forest<SurvivalCriterion>;

/// Default forest settings for survival models.
inline ForestParams default_survival_params() {
  ForestParams p;
  p.min_samples_leaf = 1;
  p.min_uncensored_leaf = 3;
  return p;
}

/// Random survival forest for one algorithm's runtime distribution.
class SurvivalModel {
 public:
  static constexpr std::size_t kMaxGrid = 10000;

  SurvivalModel() = default;

  static SurvivalModel fit(const SurvivalDataset& d, const ForestParams& params,
                           SurvivalTransform transform = SurvivalTransform::ProductLimit) {
    if (d.empty()) throw ArgumentError("SurvivalModel::fit: empty dataset");
    SurvivalModel m;
    m.cutoff_ = d.cutoff;
    m.transform_ = transform;
    m.n_features_ = d.x.cols();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!d.censored[i]) m.grid_.push_back(d.times[i]);
    std::sort(m.grid_.begin(), m.grid_.end());
    m.grid_.erase(std::unique(m.grid_.begin(), m.grid_.end()), m.grid_.end());
    if (m.grid_.empty()) {
      log::warn("survival model: no uncensored samples; survival fixed at 1 up to the cutoff");
      m.degenerate_ = true;
    }
    if (m.grid_.empty() || m.grid_.back() < d.cutoff) m.grid_.push_back(d.cutoff);
    std::vector<double> w(d.size(), 1.0);
    m.forest_ = fit_forest(d.x, SurvivalCriterion(d.times, d.censored, w), params);
    return m;
  }

  double cutoff() const { return cutoff_; }
  bool degenerate() const { return degenerate_; }
  SurvivalTransform transform() const { return transform_; }
  void set_transform(SurvivalTransform t) { transform_ = t; }
  std::span<const double> grid() const { return grid_; }
  const SurvivalForest& forest() const { return forest_; }

  /// Mean of the per-tree leaf cumulative hazards, on the union of their
  /// knots plus the cutoff.
  StepFunction predict_chf(std::span<const double> x) const {
    if (x.size() != n_features_)
      throw ArgumentError("survival model expects " + std::to_string(n_features_) + " features, got " +
                          std::to_string(x.size()));
    const auto leaves = forest_.leaves_for(x);
    std::vector<double> increments(grid_.size(), 0.0);
    std::vector<std::uint8_t> touched(grid_.size(), 0);
    const double inv_trees = 1.0 / static_cast<double>(leaves.size());
    for (const StepFunction* leaf : leaves) {
      double prev = 0.0;
      for (std::size_t j = 0; j < leaf->size(); ++j) {
        const auto g = static_cast<std::size_t>(
            std::lower_bound(grid_.begin(), grid_.end(), leaf->knots()[j]) - grid_.begin());
        increments[g] += (leaf->values()[j] - prev) * inv_trees;
        touched[g] = 1;
        prev = leaf->values()[j];
      }
    }
    touched[grid_.size() - 1] = 1;  // the cutoff
    std::vector<std::size_t> keep;
    for (std::size_t g = 0; g < grid_.size(); ++g)
      if (touched[g]) keep.push_back(g);
    if (keep.size() > kMaxGrid) {
      // Uniform thinning; the last knot (the cutoff) is always kept.
      std::vector<std::size_t> thinned;
      const double stride = static_cast<double>(keep.size()) / static_cast<double>(kMaxGrid);
      for (std::size_t k = 0; k + 1 < kMaxGrid; ++k) thinned.push_back(keep[static_cast<std::size_t>(k * stride)]);
      thinned.push_back(keep.back());
      thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
      keep = std::move(thinned);
    }
    std::vector<double> knots, values;
    knots.reserve(keep.size());
    values.reserve(keep.size());
    double h = 0.0;
    std::size_t g = 0;
    for (std::size_t k : keep) {
      for (; g <= k; ++g) h += increments[g];
      knots.push_back(grid_[k]);
      values.push_back(std::max(h, values.empty() ? 0.0 : values.back()));
    }
    return StepFunction(std::move(knots), std::move(values), 0.0);
  }

  StepFunction predict_survival(std::span<const double> x) const {
    if (degenerate_) return StepFunction({cutoff_}, {1.0}, 1.0);
    const StepFunction chf = predict_chf(x);
    return transform_ == SurvivalTransform::Exponential ? chf_to_survival(chf) : chf_to_survival_product_limit(chf);
  }

 private:
  SurvivalForest forest_;
  std::vector<double> grid_;
  double cutoff_ = 0.0;
  std::size_t n_features_ = 0;
  bool degenerate_ = false;
  SurvivalTransform transform_ = SurvivalTransform::ProductLimit;
};

inline StepFunction predict_survival(const SurvivalModel& m, std::span<const double> x) { return m.predict_survival(x); }

/// Expected loss of the runtime distribution described by a survival step
/// function: each drop at a knot t <= C carries loss(t), and the mass
/// remaining after the last knot <= C is charged the timeout loss.
inline double expected_loss(const StepFunction& sf, const LossSpec& loss, double cutoff) {
  if (!sf.is_survival(1e-12)) throw InvariantError("expected_loss: not a valid survival function");
  double total_mass = 0.0, acc = 0.0, prev = sf.initial_value();
  for (std::size_t j = 0; j < sf.size(); ++j) {
    const double t = sf.knots()[j];
    if (t > cutoff) break;
    const double mass = std::max(prev - sf.values()[j], 0.0);
    if (mass > 0.0) acc += mass * evaluate(loss, t, cutoff, false);
    total_mass += mass;
    prev = sf.values()[j];
  }
  const double residual = std::max(prev, 0.0);
  total_mass += residual;
  acc += residual * timeout_loss(loss, cutoff);
  const double deviation = std::abs(total_mass - 1.0);
  if (deviation > 1e-6) throw InvariantError("expected_loss: probability masses sum to " + std::to_string(total_mass));
  if (deviation > 1e-9) {
    log::debug("expected_loss: renormalizing masses summing to ", total_mass);
    acc /= total_mass;
  }
  return acc;
}

}  // namespace survsel
