#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/features.hpp"

namespace survsel {

/// Anderson-Darling statistic for normality with estimated mean and variance,
/// including the small-sample adjustment A2 * (1 + 4/n - 25/n^2).
inline double anderson_darling_normal(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ArgumentError("anderson_darling_normal: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return 0.0;
  std::sort(values.begin(), values.end());
  std::vector<double> cdf(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (values[i] - mean) / sd;
    cdf[i] = std::clamp(0.5 * std::erfc(-z / std::numbers::sqrt2), 1e-300, 1.0 - 1e-16);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += static_cast<double>(2 * i + 1) * (std::log(cdf[i]) + std::log1p(-cdf[n - 1 - i]));
  const double nd = static_cast<double>(n);
  const double a2 = -nd - sum / nd;
  return a2 * (1.0 + 4.0 / nd - 25.0 / (nd * nd));
}

/// Critical value of the adjusted statistic at significance 0.05.
inline constexpr double kAndersonDarlingCritical05 = 0.752;

struct Clustering {
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> assignment;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

inline std::size_t nearest(const std::vector<std::vector<double>>& centers, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(centers[c], x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

/// Lloyd iterations on the given members. Empty clusters keep their center.
inline void lloyd(const FeatureMatrix& x, std::span<const std::size_t> members,
                  std::vector<std::vector<double>>& centers, std::vector<std::size_t>& assignment,
                  std::size_t max_iter = 100) {
  const std::size_t d = x.cols();
  assignment.assign(members.size(), 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = iter == 0;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t c = nearest(centers, x.row(members[k]));
      if (c != assignment[k]) changed = true;
      assignment[k] = c;
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto row = x.row(members[k]);
      for (std::size_t j = 0; j < d; ++j) sums[assignment[k]][j] += row[j];
      ++counts[assignment[k]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < d; ++j) centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
  }
}

/// Leading principal direction (unit vector) and its eigenvalue, by power iteration.
inline std::pair<std::vector<double>, double> principal_component(const FeatureMatrix& x,
                                                                  std::span<const std::size_t> members,
                                                                  std::span<const double> center, std::mt19937_64& rng) {
  const std::size_t d = x.cols();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(d);
  for (double& e : v) e = normal(rng);
  double lambda = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> next(d, 0.0);
    for (auto i : members) {
      auto row = x.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += (row[j] - center[j]) * v[j];
      for (std::size_t j = 0; j < d; ++j) next[j] += dot * (row[j] - center[j]);
    }
    double norm = 0.0;
    for (double e : next) norm += e * e;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) return {v, 0.0};
    for (std::size_t j = 0; j < d; ++j) v[j] = next[j] / norm;
    lambda = norm / static_cast<double>(members.size());
  }
  return {v, lambda};
}

}  // namespace detail

/// G-means: starts from one cluster and splits every cluster whose points,
/// projected on the axis joining its two 2-means children, fail the
/// Anderson-Darling normality test. A split is accepted only when both
/// children keep at least `min_cluster_size` points and the cluster count
/// stays within `max_clusters`.
inline Clustering gmeans(const FeatureMatrix& x, std::size_t max_clusters, std::size_t min_cluster_size,
                         std::uint64_t seed, double critical = kAndersonDarlingCritical05) {
  if (x.rows() == 0) throw ArgumentError("gmeans: no points");
  if (max_clusters < 1) throw ArgumentError("gmeans: max_clusters must be >= 1");
  const std::size_t n = x.rows(), d = x.cols();
  std::mt19937_64 rng(seed);

  Clustering out;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j) / static_cast<double>(n);
  out.centers.push_back(mean);
  std::vector<std::size_t> everyone(n);
  for (std::size_t i = 0; i < n; ++i) everyone[i] = i;

  for (;;) {
    detail::lloyd(x, everyone, out.centers, out.assignment);
    std::vector<std::vector<std::size_t>> members(out.centers.size());
    for (std::size_t i = 0; i < n; ++i) members[out.assignment[i]].push_back(i);

    std::vector<std::vector<double>> next;
    std::size_t budget = max_clusters - out.centers.size();
    bool split_any = false;
    for (std::size_t c = 0; c < out.centers.size(); ++c) {
      const auto& m = members[c];
      bool split = false;
      if (budget > 0 && m.size() >= 2 * std::max<std::size_t>(min_cluster_size, 1) && d > 0) {
        auto [axis, lambda] = detail::principal_component(x, m, out.centers[c], rng);
        if (lambda > 0.0) {
          const double step = std::sqrt(2.0 * lambda / std::numbers::pi);
          std::vector<std::vector<double>> kids(2, out.centers[c]);
          for (std::size_t j = 0; j < d; ++j) {
            kids[0][j] += step * axis[j];
            kids[1][j] -= step * axis[j];
          }
          std::vector<std::size_t> kid_of;
          detail::lloyd(x, m, kids, kid_of);
          const auto n0 = static_cast<std::size_t>(std::count(kid_of.begin(), kid_of.end(), std::size_t{0}));
          const std::size_t n1 = m.size() - n0;
          std::vector<double> dir(d);
          double dir_sq = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dir[j] = kids[0][j] - kids[1][j];
            dir_sq += dir[j] * dir[j];
          }
          if (n0 >= min_cluster_size && n1 >= min_cluster_size && dir_sq > 0.0) {
            std::vector<double> proj;
            proj.reserve(m.size());
            for (auto i : m) {
              auto row = x.row(i);
              double dot = 0.0;
              for (std::size_t j = 0; j < d; ++j) dot += row[j] * dir[j];
              proj.push_back(dot / dir_sq);
            }
            if (anderson_darling_normal(std::move(proj)) > critical) {
              next.push_back(std::move(kids[0]));
              next.push_back(std::move(kids[1]));
              --budget;
              split = split_any = true;
            }
          }
        }
      }
      if (!split) next.push_back(out.centers[c]);
    }
    out.centers = std::move(next);
    if (!split_any) break;
  }
  detail::lloyd(x, everyone, out.centers, out.assignment);
  return out;
}

}  // namespace survsel
