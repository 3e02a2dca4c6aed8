#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/scenario.hpp"

namespace survsel {

/// Ground-truth runtime distribution of one algorithm.
struct RuntimeDistribution {
  enum class Kind { TwoPoint, LogNormal, Weibull };
  Kind kind = Kind::TwoPoint;
  // TwoPoint: `value` with probability `p`, else `alt` (may be +inf).
  double value = 1.0;
  double p = 1.0;
  double alt = std::numeric_limits<double>::infinity();
  // LogNormal: log T ~ N(mu, sigma^2).
  double mu = 0.0;
  double sigma = 1.0;
  // Weibull: P(T > t) = exp(-(t / scale)^shape).
  double shape = 1.0;
  double scale = 1.0;

  static RuntimeDistribution point(double v) { return two_point(v, 1.0, v); }
  static RuntimeDistribution two_point(double v, double prob, double alternative) {
    RuntimeDistribution d;
    d.kind = Kind::TwoPoint;
    d.value = v;
    d.p = prob;
    d.alt = alternative;
    return d;
  }
  static RuntimeDistribution log_normal(double mu, double sigma) {
    RuntimeDistribution d;
    d.kind = Kind::LogNormal;
    d.mu = mu;
    d.sigma = sigma;
    return d;
  }
  static RuntimeDistribution weibull(double shape, double scale) {
    RuntimeDistribution d;
    d.kind = Kind::Weibull;
    d.shape = shape;
    d.scale = scale;
    return d;
  }

  void validate() const {
    switch (kind) {
      case Kind::TwoPoint:
        if (!(value > 0.0) || !(alt > 0.0)) throw ArgumentError("two-point distribution needs positive values");
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("two-point probability must lie in [0, 1]");
        break;
      case Kind::LogNormal:
        if (!(sigma > 0.0) || !std::isfinite(mu)) throw ArgumentError("log-normal needs sigma > 0");
        break;
      case Kind::Weibull:
        if (!(shape > 0.0) || !(scale > 0.0)) throw ArgumentError("Weibull needs shape > 0 and scale > 0");
        break;
    }
  }

  /// P(T >= t) of the uncensored runtime.
  double survival(double t) const {
    switch (kind) {
      case Kind::TwoPoint: return (t <= value ? p : 0.0) + (t <= alt ? 1.0 - p : 0.0);
      case Kind::LogNormal:
        return t <= 0.0 ? 1.0 : 0.5 * std::erfc((std::log(t) - mu) / (sigma * std::sqrt(2.0)));
      case Kind::Weibull: return t <= 0.0 ? 1.0 : std::exp(-std::pow(t / scale, shape));
    }
    return 0.0;
  }

  double sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (kind) {
      case Kind::TwoPoint: return u(rng) < p ? value : alt;
      case Kind::LogNormal: {
        std::normal_distribution<double> n(mu, sigma);
        return std::exp(n(rng));
      }
      case Kind::Weibull: {
        const double v = u(rng);
        return scale * std::pow(-std::log1p(-v), 1.0 / shape);
      }
    }
    return 0.0;
  }
};

enum class FeatureModel {
  /// One constant feature plus `n_noise` standard-normal features.
  ConstantNoise,
  /// One latent standard-normal feature per algorithm scaling its runtime by
  /// exp(link * z), plus `n_noise` noise features.
  Linked,
};

struct SyntheticSpec {
  std::string name = "synthetic";
  std::vector<std::string> algorithms;
  std::vector<RuntimeDistribution> distributions;
  std::vector<double> links;  // Linked model only; defaults to 1 per algorithm
  std::size_t n_instances = 100;
  FeatureModel feature_model = FeatureModel::ConstantNoise;
  std::size_t n_noise = 1;
  double feature_cost = 0.0;
  double cutoff = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (algorithms.empty()) throw ArgumentError("synthetic spec: no algorithms");
    if (algorithms.size() != distributions.size())
      throw ArgumentError("synthetic spec: one distribution per algorithm required");
    if (!links.empty() && links.size() != algorithms.size())
      throw ArgumentError("synthetic spec: one link coefficient per algorithm required");
    if (n_instances == 0) throw ArgumentError("synthetic spec: n_instances must be positive");
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ArgumentError("synthetic spec: cutoff must be positive");
    if (!(feature_cost >= 0.0)) throw ArgumentError("synthetic spec: feature_cost must be >= 0");
    for (const auto& d : distributions) d.validate();
  }
};

struct SyntheticScenario {
  Scenario scenario;
  std::vector<RuntimeDistribution> truth;
  /// Uncensored sampled runtimes (instance-major), before clamping at C.
  std::vector<double> latent_runtimes;
};

inline SyntheticScenario generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_instances, m = spec.algorithms.size();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticScenario out;
  out.truth = spec.distributions;
  Scenario& s = out.scenario;
  s.name = spec.name;
  s.algorithms = spec.algorithms;
  s.cutoff = spec.cutoff;
  const bool linked = spec.feature_model == FeatureModel::Linked;
  if (linked) {
    for (const auto& a : spec.algorithms) s.feature_names.push_back("latent_" + a);
  } else {
    s.feature_names.push_back("constant");
  }
  for (std::size_t k = 0; k < spec.n_noise; ++k) s.feature_names.push_back("noise_" + std::to_string(k));

  s.features = FeatureMatrix(0, s.feature_names.size());
  std::vector<double> row(s.feature_names.size());
  out.latent_runtimes.resize(n * m);
  s.runtimes.resize(n * m);
  s.censored.resize(n * m);
  const int width = static_cast<int>(std::to_string(n).size());
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i);
    s.instances.push_back("inst" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id);
    std::size_t col = 0;
    if (linked) {
      for (std::size_t a = 0; a < m; ++a) row[col++] = normal(rng);
    } else {
      row[col++] = 1.0;
    }
    for (std::size_t k = 0; k < spec.n_noise; ++k) row[col++] = normal(rng);
    s.features.push_row(row);
    s.feature_costs.push_back(spec.feature_cost);
    for (std::size_t a = 0; a < m; ++a) {
      double t = spec.distributions[a].sample(rng);
      if (linked) t *= std::exp((spec.links.empty() ? 1.0 : spec.links[a]) * row[a]);
      out.latent_runtimes[i * m + a] = t;
      const bool cens = !(t < spec.cutoff);
      s.runtimes[i * m + a] = cens ? spec.cutoff : std::max(t, 1e-6);
      s.censored[i * m + a] = cens ? 1 : 0;
    }
  }
  s.validate();
  return out;
}

}  // namespace survsel
