#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "survsel/errors.hpp"

namespace survsel {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Dense row-major n x d matrix of feature values. Missing entries are NaN.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  void push_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw ArgumentError("feature row has dimension " + std::to_string(r.size()) +
                                               ", expected " + std::to_string(cols_));
    values_.insert(values_.end(), r.begin(), r.end());
    ++rows_;
  }

  const std::vector<double>& data() const { return values_; }

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) return false;
    for (std::size_t k = 0; k < a.values_.size(); ++k) {
      const double x = a.values_[k], y = b.values_[k];
      if (!(x == y || (is_missing(x) && is_missing(y)))) return false;
    }
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Median of the non-missing values; 0 when every value is missing.
inline double median_of(std::vector<double> values) {
  std::erase_if(values, [](double v) { return is_missing(v); });
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline std::vector<double> column_medians(const FeatureMatrix& x) {
  std::vector<double> medians(x.cols(), 0.0);
  std::vector<double> column(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t i = 0; i < x.rows(); ++i) column[i] = x(i, j);
    medians[j] = median_of(column);
  }
  return medians;
}

inline void impute_missing(FeatureMatrix& x, std::span<const double> medians) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      if (is_missing(r[j])) r[j] = medians[j];
  }
}

inline std::vector<double> impute_missing(std::span<const double> row, std::span<const double> medians) {
  if (row.size() != medians.size())
    throw ArgumentError("feature vector has dimension " + std::to_string(row.size()) + ", model expects " +
                        std::to_string(medians.size()));
  std::vector<double> out(row.begin(), row.end());
  for (std::size_t j = 0; j < out.size(); ++j)
    if (is_missing(out[j])) out[j] = medians[j];
  return out;
}

/// SplitMix64 step; used to derive independent sub-seeds from a master seed.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Index of the smallest value; ties resolve to the lowest index.
inline std::size_t argmin(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] < values[best]) best = k;
  return best;
}

}  // namespace survsel
