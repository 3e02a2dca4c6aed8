#pragma once

// CART-style binary trees and bagged forests with pluggable split criteria.
//
// A criterion policy supplies the labels and the split statistic:
//
//   struct Criterion {
//     using Leaf = ...;
//     struct State;                                     // running left/right totals
//     std::span<const double> weights() const;          // per-sample weights
//     bool can_split(std::span<const std::uint32_t>, const ForestParams&) const;
//     State start(std::span<const std::uint32_t> node) const;   // everything on the right
//     void move_left(State&, std::uint32_t sample) const;
//     bool admissible(const State&, const ForestParams&) const;
//     double gain(const State&) const;                  // larger is better, 0 = useless
//     Leaf make_leaf(std::span<const std::uint32_t> node) const;
//     static constexpr std::string_view tag;
//     static void write_leaf(std::ostream&, const Leaf&);
//     static Leaf read_leaf(std::istream&);
//   };

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/features.hpp"
#include "survsel/parallel.hpp"

namespace survsel {

struct ForestParams {
  std::size_t n_trees = 100;
  /// 0 selects ceil(sqrt(d)); a value in (0, 1) is a fraction of d; >= 1 is a count.
  double max_features = 0.0;
  std::size_t min_samples_leaf = 1;
  /// Survival trees only: each child must keep this many uncensored samples.
  std::size_t min_uncensored_leaf = 3;
  /// 0 means unlimited.
  std::size_t max_depth = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// Worker threads for tree fitting; results do not depend on it.
  int jobs = 1;

  void validate() const {
    if (n_trees < 1) throw ArgumentError("forest: n_trees must be >= 1");
    if (min_samples_leaf < 1) throw ArgumentError("forest: min_samples_leaf must be >= 1");
    if (min_uncensored_leaf < 1) throw ArgumentError("forest: min_uncensored_leaf must be >= 1");
    if (!(max_features >= 0.0)) throw ArgumentError("forest: max_features must be >= 0");
  }

  std::size_t features_per_split(std::size_t d) const {
    if (d == 0) return 0;
    std::size_t m = 0;
    if (max_features == 0.0) m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    else if (max_features < 1.0) m = static_cast<std::size_t>(std::ceil(max_features * static_cast<double>(d)));
    else m = static_cast<std::size_t>(max_features);
    return std::clamp<std::size_t>(m, 1, d);
  }
};

using Rng = std::mt19937_64;

namespace detail {

/// Fenwick tree over positions 0..n-1 with prefix sums.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n = 0) : tree_(n + 1, 0.0) {}
  void reset(std::size_t n) { tree_.assign(n + 1, 0.0); }
  void add(std::size_t pos, double v) {
    for (std::size_t i = pos + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
  }
  /// Sum over positions [0, pos].
  double prefix(std::size_t pos) const {
    double s = 0.0;
    for (std::size_t i = pos + 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<double> tree_;
};

inline double split_midpoint(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return (mid >= hi) ? lo : mid;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Regression: weighted variance reduction.

struct RegressionLeaf {
  double mean = 0.0;
  friend bool operator==(const RegressionLeaf&, const RegressionLeaf&) = default;
};

class VarianceCriterion {
 public:
  using Leaf = RegressionLeaf;
  static constexpr std::string_view tag = "regression";

  VarianceCriterion(std::span<const double> labels, std::span<const double> weights)
      : y_(labels), w_(weights) {
    if (y_.size() != w_.size()) throw ArgumentError("regression criterion: labels and weights differ in length");
  }

  struct State {
    double w_left = 0, s_left = 0, w_total = 0, s_total = 0;
    std::size_t n_left = 0, n_total = 0;
  };

  std::span<const double> weights() const { return w_; }
  std::size_t size() const { return y_.size(); }

  bool can_split(std::span<const std::uint32_t> node, const ForestParams& p) const {
    if (node.size() < 2 * p.min_samples_leaf) return false;
    const double first = y_[node.front()];
    return std::any_of(node.begin(), node.end(), [&](std::uint32_t i) { return y_[i] != first; });
  }

  State start(std::span<const std::uint32_t> node) const {
    State s;
    s.n_total = node.size();
    for (auto i : node) {
      s.w_total += w_[i];
      s.s_total += w_[i] * y_[i];
    }
    return s;
  }

  void move_left(State& s, std::uint32_t i) const {
    s.w_left += w_[i];
    s.s_left += w_[i] * y_[i];
    ++s.n_left;
  }

  bool admissible(const State& s, const ForestParams& p) const {
    return s.n_left >= p.min_samples_leaf && s.n_total - s.n_left >= p.min_samples_leaf && s.w_left > 0 &&
           s.w_total - s.w_left > 0;
  }

  double gain(const State& s) const {
    const double w_right = s.w_total - s.w_left;
    const double s_right = s.s_total - s.s_left;
    const double g = s.s_left * s.s_left / s.w_left + s_right * s_right / w_right - s.s_total * s.s_total / s.w_total;
    // Cancellation noise relative to the label scale is not a real gain.
    const double scale = std::abs(s.s_total * s.s_total / s.w_total);
    return g > 1e-12 * scale ? g : 0.0;
  }

  Leaf make_leaf(std::span<const std::uint32_t> node) const {
    double w = 0, s = 0;
    for (auto i : node) {
      w += w_[i];
      s += w_[i] * y_[i];
    }
    return {w > 0 ? s / w : 0.0};
  }

  static void write_leaf(std::ostream& os, const Leaf& leaf) { os << leaf.mean; }
  static Leaf read_leaf(std::istream& is) {
    Leaf leaf;
    is >> leaf.mean;
    return leaf;
  }

 private:
  std::span<const double> y_;
  std::span<const double> w_;
};

// ---------------------------------------------------------------------------
// Classification: weighted Gini impurity decrease.

struct ClassLeaf {
  std::vector<double> frequencies;  // normalized class weights
  friend bool operator==(const ClassLeaf&, const ClassLeaf&) = default;
};

class GiniCriterion {
 public:
  using Leaf = ClassLeaf;
  static constexpr std::string_view tag = "classification";

  GiniCriterion(std::span<const std::uint32_t> labels, std::size_t n_classes, std::span<const double> weights)
      : y_(labels), k_(n_classes), w_(weights) {
    if (y_.size() != w_.size()) throw ArgumentError("gini criterion: labels and weights differ in length");
    for (auto c : y_)
      if (c >= k_) throw ArgumentError("gini criterion: class label out of range");
  }

  struct State {
    std::vector<double> left, total;
    double w_left = 0, w_total = 0, sq_left = 0, sq_right = 0, sq_total = 0;
    std::size_t n_left = 0, n_total = 0;
  };

  std::span<const double> weights() const { return w_; }
  std::size_t size() const { return y_.size(); }
  std::size_t n_classes() const { return k_; }

  bool can_split(std::span<const std::uint32_t> node, const ForestParams& p) const {
    if (node.size() < 2 * p.min_samples_leaf) return false;
    const auto first = y_[node.front()];
    return std::any_of(node.begin(), node.end(), [&](std::uint32_t i) { return y_[i] != first; });
  }

  State start(std::span<const std::uint32_t> node) const {
    State s;
    s.left.assign(k_, 0.0);
    s.total.assign(k_, 0.0);
    s.n_total = node.size();
    for (auto i : node) {
      s.total[y_[i]] += w_[i];
      s.w_total += w_[i];
    }
    for (double c : s.total) s.sq_total += c * c;
    s.sq_right = s.sq_total;
    return s;
  }

  void move_left(State& s, std::uint32_t i) const {
    const auto c = y_[i];
    const double w = w_[i];
    const double right_c = s.total[c] - s.left[c];
    s.sq_left += 2.0 * w * s.left[c] + w * w;
    s.sq_right += -2.0 * w * right_c + w * w;
    s.left[c] += w;
    s.w_left += w;
    ++s.n_left;
  }

  bool admissible(const State& s, const ForestParams& p) const {
    return s.n_left >= p.min_samples_leaf && s.n_total - s.n_left >= p.min_samples_leaf && s.w_left > 0 &&
           s.w_total - s.w_left > 0;
  }

  double gain(const State& s) const {
    const double w_right = s.w_total - s.w_left;
    const double g = s.sq_left / s.w_left + s.sq_right / w_right - s.sq_total / s.w_total;
    return g > 1e-12 * s.w_total ? g : 0.0;
  }

  Leaf make_leaf(std::span<const std::uint32_t> node) const {
    Leaf leaf;
    leaf.frequencies.assign(k_, 0.0);
    double w = 0;
    for (auto i : node) {
      leaf.frequencies[y_[i]] += w_[i];
      w += w_[i];
    }
    if (w > 0)
      for (double& f : leaf.frequencies) f /= w;
    return leaf;
  }

  static void write_leaf(std::ostream& os, const Leaf& leaf) {
    os << leaf.frequencies.size();
    for (double f : leaf.frequencies) os << ' ' << f;
  }
  static Leaf read_leaf(std::istream& is) {
    std::size_t k = 0;
    is >> k;
    Leaf leaf;
    leaf.frequencies.resize(k);
    for (double& f : leaf.frequencies) is >> f;
    return leaf;
  }

 private:
  std::span<const std::uint32_t> y_;
  std::size_t k_;
  std::span<const double> w_;
};

// ---------------------------------------------------------------------------
// Survival: two-sample log-rank statistic.

/// Log-rank chi-square statistic for two groups of right-censored times.
///
/// Pools the distinct event times of both groups and compares observed left
/// events against their hypergeometric expectation. Returns 0 when there are no
/// events or the variance vanishes.
inline double log_rank_statistic(std::span<const double> left_times, std::span<const std::uint8_t> left_censored,
                                 std::span<const double> right_times, std::span<const std::uint8_t> right_censored) {
  if (left_times.size() != left_censored.size() || right_times.size() != right_censored.size())
    throw ArgumentError("log-rank: times and censor flags differ in length");
  std::vector<double> events;
  for (std::size_t i = 0; i < left_times.size(); ++i)
    if (!left_censored[i]) events.push_back(left_times[i]);
  for (std::size_t i = 0; i < right_times.size(); ++i)
    if (!right_censored[i]) events.push_back(right_times[i]);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());

  double observed_minus_expected = 0.0, variance = 0.0;
  for (double t : events) {
    double d_left = 0, y_left = 0, d = 0, y = 0;
    for (std::size_t i = 0; i < left_times.size(); ++i) {
      if (left_times[i] >= t) ++y_left;
      if (left_times[i] == t && !left_censored[i]) ++d_left;
    }
    y = y_left;
    d = d_left;
    for (std::size_t i = 0; i < right_times.size(); ++i) {
      if (right_times[i] >= t) ++y;
      if (right_times[i] == t && !right_censored[i]) ++d;
    }
    observed_minus_expected += d_left - y_left * d / y;
    if (y > 1) variance += (y_left / y) * (1.0 - y_left / y) * d * (y - d) / (y - 1.0);
  }
  if (variance <= 1e-12) return 0.0;
  return observed_minus_expected * observed_minus_expected / variance;
}

/// Split criterion maximizing the log-rank statistic between children.
/// Leaf construction is left to derived criteria (see survival_forest.hpp).
class LogRankSplit {
 public:
  LogRankSplit(std::span<const double> times, std::span<const std::uint8_t> censored, std::span<const double> weights)
      : t_(times), c_(censored), w_(weights) {
    if (t_.size() != c_.size() || t_.size() != w_.size())
      throw ArgumentError("log-rank criterion: times, censor flags and weights differ in length");
  }

  struct State {
    std::vector<double> event_times;   // distinct event times in the node
    std::vector<double> cum_rate;      // R(k) = sum_{j<k} d_j / Y_j  (index k = #event times <= y)
    std::vector<double> cum_var;       // sum_{j<k} c_j
    std::vector<double> cum_var_sq;    // sum_{j<k} c_j / Y_j
    detail::Fenwick at_risk_w;         // left weights by risk index
    detail::Fenwick at_risk_wu;        // left weights times cum_var_sq by risk index
    double events_left = 0;            // observed left events
    double expected_left = 0;          // sum over left samples of w * R(k)
    double var_linear = 0;             // sum over left samples of w * cum_var(k)
    double var_quadratic = 0;          // sum_j c_j / Y_j * YL_j^2
    std::size_t n_left = 0, n_total = 0;
    std::size_t uncensored_left = 0, uncensored_total = 0;
  };

  std::span<const double> weights() const { return w_; }
  std::span<const double> times() const { return t_; }
  std::span<const std::uint8_t> censored() const { return c_; }
  std::size_t size() const { return t_.size(); }

  bool can_split(std::span<const std::uint32_t> node, const ForestParams& p) const {
    if (node.size() < 2 * p.min_samples_leaf) return false;
    std::size_t uncensored = 0;
    for (auto i : node) uncensored += c_[i] ? 0 : 1;
    return uncensored >= 2 * p.min_uncensored_leaf;
  }

  State start(std::span<const std::uint32_t> node) const {
    State s;
    s.n_total = node.size();
    for (auto i : node)
      if (!c_[i]) {
        s.event_times.push_back(t_[i]);
        ++s.uncensored_total;
      }
    std::sort(s.event_times.begin(), s.event_times.end());
    s.event_times.erase(std::unique(s.event_times.begin(), s.event_times.end()), s.event_times.end());
    const std::size_t T = s.event_times.size();
    std::vector<double> deaths(T, 0.0), at_risk(T + 1, 0.0);
    for (auto i : node) {
      const std::size_t k = risk_index(s, t_[i]);
      at_risk[k] += w_[i];  // at risk for event times j < k
      if (!c_[i]) deaths[k - 1] += w_[i];
    }
    for (std::size_t j = T; j-- > 0;) at_risk[j] += at_risk[j + 1];
    // at_risk[k] now = weight with risk index >= k; event time j has at_risk[j + 1].
    s.cum_rate.assign(T + 1, 0.0);
    s.cum_var.assign(T + 1, 0.0);
    s.cum_var_sq.assign(T + 1, 0.0);
    for (std::size_t j = 0; j < T; ++j) {
      const double y = at_risk[j + 1], d = deaths[j];
      const double c = y > 1.0 ? d * (y - d) / (y * (y - 1.0)) : 0.0;
      s.cum_rate[j + 1] = s.cum_rate[j] + d / y;
      s.cum_var[j + 1] = s.cum_var[j] + c;
      s.cum_var_sq[j + 1] = s.cum_var_sq[j] + c / y;
    }
    s.at_risk_w.reset(T + 1);
    s.at_risk_wu.reset(T + 1);
    return s;
  }

  void move_left(State& s, std::uint32_t i) const {
    const double w = w_[i];
    const std::size_t k = risk_index(s, t_[i]);
    const double u_k = s.cum_var_sq[k];
    // sum over current left samples of w' * U(min(k', k))
    const double overlap = s.at_risk_wu.prefix(k) + u_k * (total_left_weight(s) - s.at_risk_w.prefix(k));
    s.var_quadratic += 2.0 * w * overlap + w * w * u_k;
    s.var_linear += w * s.cum_var[k];
    s.expected_left += w * s.cum_rate[k];
    if (!c_[i]) {
      s.events_left += w;
      ++s.uncensored_left;
    }
    s.at_risk_w.add(k, w);
    s.at_risk_wu.add(k, w * u_k);
    ++s.n_left;
  }

  bool admissible(const State& s, const ForestParams& p) const {
    return s.n_left >= p.min_samples_leaf && s.n_total - s.n_left >= p.min_samples_leaf &&
           s.uncensored_left >= p.min_uncensored_leaf &&
           s.uncensored_total - s.uncensored_left >= p.min_uncensored_leaf;
  }

  double gain(const State& s) const {
    const double variance = s.var_linear - s.var_quadratic;
    if (variance <= 1e-12) return 0.0;
    const double diff = s.events_left - s.expected_left;
    const double stat = diff * diff / variance;
    return stat > 1e-9 ? stat : 0.0;
  }

 private:
  /// Number of node event times <= t; a sample is at risk at event times j < index.
  static std::size_t risk_index(const State& s, double t) {
    return static_cast<std::size_t>(std::upper_bound(s.event_times.begin(), s.event_times.end(), t) -
                                    s.event_times.begin());
  }
  static double total_left_weight(const State& s) {
    return s.at_risk_w.prefix(s.event_times.size());
  }

  std::span<const double> t_;
  std::span<const std::uint8_t> c_;
  std::span<const double> w_;
};

// ---------------------------------------------------------------------------
// Trees.

template <typename Criterion>
class Tree {
 public:
  using Leaf = typename Criterion::Leaf;

  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t leaf = 0;
    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  Tree() = default;
  Tree(std::size_t n_features, std::vector<Node> nodes, std::vector<Leaf> leaves)
      : n_features_(n_features), nodes_(std::move(nodes)), leaves_(std::move(leaves)) {}

  /// Leaf index reached by x; routes left iff x[feature] <= threshold.
  std::size_t route(std::span<const double> x) const {
    if (x.size() != n_features_)
      throw ArgumentError("tree expects " + std::to_string(n_features_) + " features, got " +
                          std::to_string(x.size()));
    std::size_t n = 0;
    while (!nodes_[n].is_leaf())
      n = x[static_cast<std::size_t>(nodes_[n].feature)] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
    return nodes_[n].leaf;
  }

  const Leaf& leaf_for(std::span<const double> x) const { return leaves_[route(x)]; }

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Leaf> leaves() const { return leaves_; }
  std::size_t n_features() const { return n_features_; }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::size_t n_features_ = 0;
  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
};

/// Grows one tree on the given (possibly repeated) sample indices.
/// x must not contain missing values.
template <typename Criterion>
Tree<Criterion> fit_tree(const FeatureMatrix& x, std::vector<std::uint32_t> samples, const Criterion& criterion,
                         const ForestParams& params, Rng& rng) {
  using TreeT = Tree<Criterion>;
  using Node = typename TreeT::Node;
  if (samples.empty()) throw ArgumentError("fit_tree: no samples");

  const std::size_t d = x.cols();
  const std::size_t mtry = params.features_per_split(d);
  std::vector<Node> nodes;
  std::vector<typename Criterion::Leaf> leaves;
  std::vector<std::size_t> feature_pool(d);
  std::vector<std::pair<double, std::uint32_t>> sorted;

  struct Pending {
    std::size_t node;
    std::size_t depth;
    std::vector<std::uint32_t> samples;
  };
  std::vector<Pending> stack;
  nodes.emplace_back();
  stack.push_back({0, 0, std::move(samples)});

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    std::span<const std::uint32_t> node_samples(cur.samples);

    int best_feature = -1;
    double best_threshold = 0.0, best_gain = 0.0;
    const bool depth_ok = params.max_depth == 0 || cur.depth < params.max_depth;
    if (depth_ok && d > 0 && criterion.can_split(node_samples, params)) {
      std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < mtry; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, d - 1);
        std::swap(feature_pool[k], feature_pool[pick(rng)]);
      }
      std::vector<std::size_t> chosen(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(mtry));
      std::sort(chosen.begin(), chosen.end());

      for (std::size_t f : chosen) {
        sorted.clear();
        for (auto i : node_samples) sorted.emplace_back(x(i, f), i);
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front().first == sorted.back().first) continue;
        auto state = criterion.start(node_samples);
        for (std::size_t p = 1; p < sorted.size(); ++p) {
          criterion.move_left(state, sorted[p - 1].second);
          if (sorted[p - 1].first == sorted[p].first) continue;
          if (!criterion.admissible(state, params)) continue;
          const double g = criterion.gain(state);
          if (g > best_gain) {
            best_gain = g;
            best_feature = static_cast<int>(f);
            best_threshold = detail::split_midpoint(sorted[p - 1].first, sorted[p].first);
          }
        }
      }
    }

    if (best_feature < 0) {
      nodes[cur.node].leaf = static_cast<std::uint32_t>(leaves.size());
      leaves.push_back(criterion.make_leaf(node_samples));
      continue;
    }

    std::vector<std::uint32_t> left, right;
    for (auto i : node_samples)
      (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
    cur.samples.clear();
    cur.samples.shrink_to_fit();

    const auto left_id = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();
    const auto right_id = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();
    nodes[cur.node].feature = best_feature;
    nodes[cur.node].threshold = best_threshold;
    nodes[cur.node].left = left_id;
    nodes[cur.node].right = right_id;
    // Right pushed first so the left subtree is grown first.
    stack.push_back({right_id, cur.depth + 1, std::move(right)});
    stack.push_back({left_id, cur.depth + 1, std::move(left)});
  }
  return TreeT(d, std::move(nodes), std::move(leaves));
}

// ---------------------------------------------------------------------------
// Forests.

/// Draws n indices in [0, n) with probability proportional to weights.
inline std::vector<std::uint32_t> weighted_bootstrap(std::span<const double> weights, Rng& rng) {
  const std::size_t n = weights.size();
  std::vector<std::uint32_t> out(n);
  const bool uniform = std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights[0]; });
  if (uniform && weights[0] > 0.0) {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    for (auto& i : out) i = pick(rng);
    return out;
  }
  std::vector<double> cumulative(n);
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0.0)) throw ArgumentError("bootstrap: weights sum to zero");
  std::uniform_real_distribution<double> u(0.0, total);
  for (auto& i : out) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u(rng));
    i = static_cast<std::uint32_t>(std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1));
  }
  return out;
}

template <typename Criterion>
class Forest {
 public:
  using TreeT = Tree<Criterion>;
  using Leaf = typename Criterion::Leaf;

  Forest() = default;
  Forest(std::vector<double> medians, std::vector<TreeT> trees)
      : medians_(std::move(medians)), trees_(std::move(trees)) {}

  std::size_t n_features() const { return medians_.size(); }
  std::size_t n_trees() const { return trees_.size(); }
  std::span<const TreeT> trees() const { return trees_; }
  std::span<const double> medians() const { return medians_; }

  /// x with missing entries replaced by training medians.
  std::vector<double> prepare(std::span<const double> x) const { return impute_missing(x, medians_); }

  /// Leaf reached in every tree, in tree order.
  std::vector<const Leaf*> leaves_for(std::span<const double> x) const {
    const auto clean = prepare(x);
    std::vector<const Leaf*> out;
    out.reserve(trees_.size());
    for (const auto& t : trees_) out.push_back(&t.leaf_for(clean));
    return out;
  }

  void save(std::ostream& os) const {
    const auto old_precision = os.precision(17);
    os << "survsel-forest 1 " << Criterion::tag << '\n';
    os << medians_.size();
    for (double m : medians_) os << ' ' << m;
    os << '\n' << trees_.size() << '\n';
    for (const auto& t : trees_) {
      os << t.nodes().size() << ' ' << t.leaves().size() << '\n';
      for (const auto& n : t.nodes()) os << n.feature << ' ' << n.threshold << ' ' << n.left << ' ' << n.right << ' ' << n.leaf << '\n';
      for (const auto& l : t.leaves()) {
        Criterion::write_leaf(os, l);
        os << '\n';
      }
    }
    os.precision(old_precision);
  }

  static Forest load(std::istream& is) {
    std::string magic, tag;
    int version = 0;
    is >> magic >> version >> tag;
    if (magic != "survsel-forest" || version != 1) throw FormatError("not a survsel forest file (version 1)");
    if (tag != Criterion::tag) throw FormatError("forest file holds a '" + tag + "' forest");
    std::size_t d = 0, n_trees = 0;
    is >> d;
    std::vector<double> medians(d);
    for (double& m : medians) is >> m;
    is >> n_trees;
    std::vector<TreeT> trees;
    for (std::size_t k = 0; k < n_trees; ++k) {
      std::size_t n_nodes = 0, n_leaves = 0;
      is >> n_nodes >> n_leaves;
      std::vector<typename TreeT::Node> nodes(n_nodes);
      for (auto& n : nodes) is >> n.feature >> n.threshold >> n.left >> n.right >> n.leaf;
      std::vector<Leaf> leaves;
      leaves.reserve(n_leaves);
      for (std::size_t l = 0; l < n_leaves; ++l) leaves.push_back(Criterion::read_leaf(is));
      trees.emplace_back(d, std::move(nodes), std::move(leaves));
    }
    if (!is) throw FormatError("truncated forest file");
    return Forest(std::move(medians), std::move(trees));
  }

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  std::vector<double> medians_;
  std::vector<TreeT> trees_;
};

/// Fits a bagged forest. Each tree uses its own generator seeded from
/// (params.seed, tree index), so results do not depend on params.jobs.
template <typename Criterion>
Forest<Criterion> fit_forest(const FeatureMatrix& x, const Criterion& criterion, const ForestParams& params) {
  params.validate();
  if (x.rows() == 0) throw ArgumentError("fit_forest: empty data");
  if (criterion.size() != x.rows()) throw ArgumentError("fit_forest: label count does not match feature rows");
  auto medians = column_medians(x);
  FeatureMatrix clean = x;
  impute_missing(clean, medians);

  std::vector<Tree<Criterion>> trees(params.n_trees);
  parallel_for(params.n_trees, params.jobs, [&](std::size_t t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<std::uint32_t> samples;
    if (params.bootstrap) {
      samples = weighted_bootstrap(criterion.weights(), rng);
    } else {
      samples.resize(x.rows());
      std::iota(samples.begin(), samples.end(), 0u);
    }
    trees[t] = fit_tree(clean, std::move(samples), criterion, params, rng);
  });
  return Forest<Criterion>(std::move(medians), std::move(trees));
}

using RegressionForest = Forest<VarianceCriterion>;
using ClassificationForest = Forest<GiniCriterion>;

inline double predict_regression(const RegressionForest& f, std::span<const double> x) {
  double sum = 0.0;
  for (const auto* leaf : f.leaves_for(x)) sum += leaf->mean;
  return sum / static_cast<double>(f.n_trees());
}

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and (population) variance of the individual tree predictions.
inline MeanVariance predict_mean_variance(const RegressionForest& f, std::span<const double> x) {
  const auto leaves = f.leaves_for(x);
  double sum = 0.0;
  for (const auto* leaf : leaves) sum += leaf->mean;
  const double n = static_cast<double>(leaves.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto* leaf : leaves) ss += (leaf->mean - mean) * (leaf->mean - mean);
  return {mean, ss / n};
}

inline std::vector<double> predict_class_probs(const ClassificationForest& f, std::span<const double> x) {
  std::vector<double> probs;
  for (const auto* leaf : f.leaves_for(x)) {
    if (probs.empty()) probs.assign(leaf->frequencies.size(), 0.0);
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] += leaf->frequencies[k];
  }
  for (double& p : probs) p /= static_cast<double>(f.n_trees());
  return probs;
}

/// Regression forest with a fit/predict interface, used where a model factory
/// is expected (e.g. Schmee-Hahn imputation).
class RegressionForestModel {
 public:
  explicit RegressionForestModel(ForestParams params = {}) : params_(params) {}

  void fit(const FeatureMatrix& x, std::span<const double> y) {
    std::vector<double> w(y.size(), 1.0);
    forest_ = fit_forest(x, VarianceCriterion(y, w), params_);
  }
  double predict(std::span<const double> x) const { return predict_regression(forest_, x); }
  MeanVariance predict_mean_variance(std::span<const double> x) const {
    return survsel::predict_mean_variance(forest_, x);
  }
  const RegressionForest& forest() const { return forest_; }

 private:
  ForestParams params_;
  RegressionForest forest_;
};

}  // namespace survsel
