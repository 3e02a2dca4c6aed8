#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include "survsel/errors.hpp"

namespace survsel {

enum class LossKind { Identity, PAR10, Polynomial, CappedLog };

/// A runtime loss. Polynomial and CappedLog act on runtimes normalized by the
/// cutoff (u = t / C); Identity and PAR10 act on seconds.
struct LossSpec {
  LossKind kind = LossKind::Identity;
  double alpha = 1.0;
  double beta = 1.0;

  static LossSpec identity() { return {LossKind::Identity, 1.0, 1.0}; }
  static LossSpec par10() { return {LossKind::PAR10, 1.0, 1.0}; }
  static LossSpec polynomial(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("polynomial loss needs alpha > 0");
    return {LossKind::Polynomial, alpha, 1.0};
  }
  static LossSpec capped_log(double alpha, double beta) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("capped-log loss needs alpha in (0, 1]");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("capped-log loss needs beta > 0");
    return {LossKind::CappedLog, alpha, beta};
  }

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

/// Search ranges used when tuning surrogate losses.
struct SurrogateRanges {
  double poly_alpha_min = 0.5;
  double poly_alpha_max = 30.0;
  double log_alpha_min = 0.01;
  double log_alpha_max = 1.0;
  double log_beta_min = 0.5;
  double log_beta_max = 20.0;
};

/// Loss of a single run that took t seconds (timed_out = the run hit the cutoff).
inline double evaluate(const LossSpec& spec, double t, double cutoff, bool timed_out) {
  if (!(cutoff > 0.0)) throw ArgumentError("loss evaluation needs a positive cutoff");
  if (!(t >= 0.0) || t > cutoff) throw ArgumentError("runtime " + std::to_string(t) + " outside [0, cutoff]");
  switch (spec.kind) {
    case LossKind::Identity:
      return timed_out ? cutoff : t;
    case LossKind::PAR10:
      return timed_out ? 10.0 * cutoff : t;
    case LossKind::Polynomial:
      return timed_out ? 1.0 : std::pow(t / cutoff, spec.alpha);
    case LossKind::CappedLog: {
      if (timed_out) return spec.beta;
      const double slack = 1.0 - t / cutoff;
      if (slack < 1e-12) return spec.beta;
      return std::min(-spec.alpha * std::log(slack), spec.beta);
    }
  }
  return 0.0;
}

/// Loss charged to the residual probability mass beyond the cutoff.
inline double timeout_loss(const LossSpec& spec, double cutoff) { return evaluate(spec, cutoff, cutoff, true); }

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ArgumentError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  return v;
}

}  // namespace detail

inline std::string to_string(const LossSpec& spec) {
  using detail::format_double;
  switch (spec.kind) {
    case LossKind::Identity: return "identity";
    case LossKind::PAR10: return "par10";
    case LossKind::Polynomial: return "poly:alpha=" + format_double(spec.alpha);
    case LossKind::CappedLog:
      return "log:alpha=" + format_double(spec.alpha) + ",beta=" + format_double(spec.beta);
  }
  return "";
}

/// Parses `identity`, `par10`, `poly:alpha=A` or `log:alpha=A,beta=B`.
inline LossSpec parse_loss(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  double alpha = -1.0, beta = -1.0;
  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw ArgumentError("loss parameter '" + std::string(item) + "' lacks '='");
      const std::string_view key = item.substr(0, eq);
      const double value = detail::parse_double(item.substr(eq + 1), key);
      if (key == "alpha") alpha = value;
      else if (key == "beta") beta = value;
      else throw ArgumentError("unknown loss parameter '" + std::string(key) + "'");
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  if (head == "identity" || head == "exp") return LossSpec::identity();
  if (head == "par10") return LossSpec::par10();
  if (head == "poly") {
    if (alpha < 0.0) throw ArgumentError("poly loss needs alpha");
    return LossSpec::polynomial(alpha);
  }
  if (head == "log") {
    if (alpha < 0.0 || beta < 0.0) throw ArgumentError("log loss needs alpha and beta");
    return LossSpec::capped_log(alpha, beta);
  }
  throw ArgumentError("unknown loss '" + std::string(text) + "'");
}

}  // namespace survsel
