#pragma once

// Moderate deviation functions and the deviation-based means built on them.
//
// A moderate deviation function D(x, y) is non-decreasing in y, non-increasing
// in x and vanishes exactly on the diagonal. Given inputs x_i and non-negative
// weights w_i, the weighted D-mean is the midpoint between
//
//   sup{ y in I : sum_i w_i D(x_i, y) < 0 }  and  inf{ y in I : sum_i w_i D(x_i, y) > 0 }
//
// with I = [min x, max x]. For the epsilon family D_eps(x, y) = (x + eps)(y - x)
// the root is available in closed form.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>

#include "devfuse/error.hpp"

namespace devfuse {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo <= hi)) throw error(errc::invalid_argument, "interval requires lo <= hi");
  }

  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct SolverConfig {
  double tolerance = 1e-9;  // absolute, on y
  int max_iterations = 200;

  void validate() const {
    if (!(tolerance > 0.0) || !std::isfinite(tolerance))
      throw error(errc::invalid_argument, "solver tolerance must be positive and finite");
    if (max_iterations < 1) throw error(errc::invalid_argument, "max_iterations must be >= 1");
  }
};

// Real-to-real maps used to build basic deviation functions f(s(y) - s(x)).
class MonotoneMap {
 public:
  static MonotoneMap identity() { return MonotoneMap("identity", [](double t) { return t; }); }

  static MonotoneMap scaled(double a) {
    if (!(a > 0.0) || !std::isfinite(a))
      throw error(errc::domain, "scaled identity needs a positive finite factor");
    return MonotoneMap("scaled(" + std::to_string(a) + ")", [a](double t) { return a * t; });
  }

  static MonotoneMap odd_power(int p) {
    if (p < 1 || p % 2 == 0) throw error(errc::domain, "odd_power needs an odd exponent >= 1");
    return MonotoneMap("odd_power(" + std::to_string(p) + ")",
                       [p](double t) { return std::pow(t, p); });
  }

  /// sign(t) * |t|^p, p > 0.
  static MonotoneMap signed_power(double p) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw error(errc::domain, "signed_power needs a positive finite exponent");
    return MonotoneMap("signed_power(" + std::to_string(p) + ")", [p](double t) {
      return std::copysign(std::pow(std::abs(t), p), t);
    });
  }

  /// User-supplied map. Monotonicity is only checked when the map is used to
  /// build a deviation function.
  static MonotoneMap custom(std::string name, std::function<double(double)> fn) {
    if (!fn) throw error(errc::invalid_argument, "custom map needs a callable");
    return MonotoneMap(std::move(name), std::move(fn));
  }

  double operator()(double t) const { return fn_(t); }
  const std::string& name() const { return name_; }

 private:
  MonotoneMap(std::string name, std::function<double(double)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  std::string name_;
  std::function<double(double)> fn_;
};

// Strictness is a property checked on use, not a separate representation.
using StrictMonotoneMap = MonotoneMap;

namespace detail {

inline constexpr int kProbeSamples = 1001;
inline constexpr double kProbeLo = -10.0;
inline constexpr double kProbeHi = 10.0;

inline double probe_point(int i) {
  return kProbeLo + (kProbeHi - kProbeLo) * i / (kProbeSamples - 1);
}

inline void check_outer_map(const MonotoneMap& f) {
  if (f(0.0) != 0.0) throw error(errc::domain, "f(0) must be 0 for " + f.name());
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kProbeSamples; ++i) {
    const double t = probe_point(i);
    const double v = f(t);
    if (!std::isfinite(v)) throw error(errc::domain, f.name() + " is not finite on the probe grid");
    if (v < prev) throw error(errc::domain, f.name() + " is not non-decreasing");
    if (t != 0.0 && v == 0.0) throw error(errc::domain, f.name() + " vanishes away from 0");
    prev = v;
  }
}

inline void check_inner_map(const MonotoneMap& s) {
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kProbeSamples; ++i) {
    const double v = s(probe_point(i));
    if (!std::isfinite(v)) throw error(errc::domain, s.name() + " is not finite on the probe grid");
    if (!(v > prev)) throw error(errc::domain, s.name() + " is not strictly increasing");
    prev = v;
  }
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw error(errc::domain, std::string(what) + " must be finite");
}

}  // namespace detail

struct EpsilonDeviation {
  double epsilon;
};
struct LinearDeviation {};
struct BasicDeviation {
  MonotoneMap f;
  MonotoneMap s;
};

/// A moderate deviation function D(x, y). Construct through the factories,
/// which enforce each family's admissibility conditions.
class DeviationSpec {
 public:
  using Kind = std::variant<EpsilonDeviation, LinearDeviation, BasicDeviation>;

  /// D(x, y) = (x + eps)(y - x); requires eps >= 1.
  static DeviationSpec epsilon(double eps) {
    if (!std::isfinite(eps) || eps < 1.0)
      throw error(errc::domain, "epsilon must be finite and >= 1, got " + std::to_string(eps));
    return DeviationSpec(EpsilonDeviation{eps});
  }

  /// D(x, y) = y - x.
  static DeviationSpec linear() { return DeviationSpec(LinearDeviation{}); }

  /// D(x, y) = f(s(y) - s(x)); f non-decreasing with f(t) = 0 iff t = 0,
  /// s strictly increasing. Both are probe-checked on [-10, 10].
  static DeviationSpec basic(MonotoneMap f, MonotoneMap s) {
    detail::check_outer_map(f);
    detail::check_inner_map(s);
    return DeviationSpec(BasicDeviation{std::move(f), std::move(s)});
  }

  double operator()(double x, double y) const {
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, EpsilonDeviation>) {
            return (x + d.epsilon) * (y - x);
          } else if constexpr (std::is_same_v<T, LinearDeviation>) {
            return y - x;
          } else {
            return d.f(d.s(y) - d.s(x));
          }
        },
        kind_);
  }

  const Kind& kind() const { return kind_; }

  bool is_epsilon() const { return std::holds_alternative<EpsilonDeviation>(kind_); }
  double epsilon_value() const { return std::get<EpsilonDeviation>(kind_).epsilon; }

  std::string describe() const {
    return std::visit(
        [](const auto& d) -> std::string {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, EpsilonDeviation>) {
            return "epsilon(" + std::to_string(d.epsilon) + ")";
          } else if constexpr (std::is_same_v<T, LinearDeviation>) {
            return "linear";
          } else {
            return "basic(" + d.f.name() + ", " + d.s.name() + ")";
          }
        },
        kind_);
  }

 private:
  explicit DeviationSpec(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

inline double eval_deviation(const DeviationSpec& spec, double x, double y) {
  detail::require_finite(x, "x");
  detail::require_finite(y, "y");
  return spec(x, y);
}

namespace detail {

template <typename Real>
void check_weighted_inputs(std::span<const Real> values, std::span<const Real> weights) {
  if (values.empty()) throw error(errc::invalid_argument, "values must be non-empty");
  if (weights.size() != values.size())
    throw error(errc::invalid_weights, "weights and values differ in length");
  bool any_positive = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw error(errc::domain, "values must be finite");
    if (!std::isfinite(weights[i]) || weights[i] < Real(0))
      throw error(errc::invalid_weights, "weights must be finite and non-negative");
    any_positive = any_positive || weights[i] > Real(0);
  }
  if (!any_positive) throw error(errc::invalid_weights, "all weights are zero");
}

template <typename Real>
std::pair<Real, Real> min_max(std::span<const Real> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

// Boundary of the set {y : pred(y)} inside [lo, hi], where pred holds on a
// lower segment. Returns the midpoint of the final bracket.
template <typename Pred>
double bisect_boundary(Pred pred, double lo, double hi, const SolverConfig& cfg, int& iterations) {
  double a = lo;  // pred(a) holds
  double b = hi;  // pred(b) fails
  while (!(b - a < cfg.tolerance)) {
    if (iterations >= cfg.max_iterations)
      throw convergence_error("bisection budget of " + std::to_string(cfg.max_iterations) +
                                  " iterations exhausted",
                              a, b);
    ++iterations;
    const double mid = a + (b - a) / 2.0;
    if (mid <= a || mid >= b) break;  // bracket at floating resolution
    if (pred(mid))
      a = mid;
    else
      b = mid;
  }
  return a + (b - a) / 2.0;
}

}  // namespace detail

/// Weighted D-mean by the sup/inf midpoint construction. Each bound is found
/// by bisection on F(y) = sum w_i D(x_i, y), which is non-decreasing in y.
/// An empty sup-set yields min(values), an empty inf-set yields max(values).
template <typename Deviation>
  requires std::invocable<const Deviation&, double, double>
double d_mean_bisect(const Deviation& dev, std::span<const double> values,
                     std::span<const double> weights, const SolverConfig& cfg = {}) {
  cfg.validate();
  detail::check_weighted_inputs(values, weights);
  const auto [lo, hi] = detail::min_max(values);
  if (lo == hi) return lo;

  auto total = [&](double y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * dev(values[i], y);
    return acc;
  };
  const double f_lo = total(lo);
  const double f_hi = total(hi);
  int iterations = 0;

  double sup_neg;
  if (!(f_lo < 0.0))
    sup_neg = lo;
  else if (f_hi < 0.0)
    sup_neg = hi;
  else
    sup_neg = detail::bisect_boundary([&](double y) { return total(y) < 0.0; }, lo, hi, cfg,
                                      iterations);

  iterations = 0;
  double inf_pos;
  if (!(f_hi > 0.0))
    inf_pos = hi;
  else if (f_lo > 0.0)
    inf_pos = lo;
  else
    inf_pos = detail::bisect_boundary([&](double y) { return !(total(y) > 0.0); }, lo, hi, cfg,
                                      iterations);

  return std::clamp((sup_neg + inf_pos) / 2.0, lo, hi);
}

namespace detail {

template <std::floating_point Real, typename WeightAt>
Real epsilon_closed_impl(std::span<const Real> values, WeightAt weight_at, Real eps) {
  const auto [lo, hi] = min_max(values);
  if (lo == hi) return lo;
  Real num = 0;
  Real den = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Real w = weight_at(i);
    const Real shifted = values[i] + eps;
    num += w * values[i] * shifted;
    den += w * shifted;
  }
  if (den == Real(0) || !std::isfinite(den))
    throw error(errc::degenerate_input, "sum of w*(x+eps) vanishes");
  const Real y = num / den;
  // Internal whenever every x + eps is positive; rounding may leave it one ulp out.
  if (lo + eps > Real(0)) return std::clamp(y, lo, hi);
  return y;
}

template <std::floating_point Real>
void check_epsilon(Real eps) {
  if (!std::isfinite(eps) || eps < Real(1))
    throw error(errc::domain, "epsilon must be finite and >= 1");
}

}  // namespace detail

/// Exact root of sum w_i (x_i + eps)(y - x_i) = 0:
///   y = sum w x (x + eps) / sum w (x + eps).
/// Constant inputs are returned unchanged.
template <std::floating_point Real>
Real d_mean_epsilon_closed(std::span<const Real> values, std::span<const Real> weights, Real eps) {
  detail::check_epsilon(eps);
  detail::check_weighted_inputs(values, weights);
  return detail::epsilon_closed_impl(values, [&](std::size_t i) { return weights[i]; }, eps);
}

/// Unit-weight overload.
template <std::floating_point Real>
Real d_mean_epsilon_closed(std::span<const Real> values, Real eps) {
  detail::check_epsilon(eps);
  if (values.empty()) throw error(errc::invalid_argument, "values must be non-empty");
  for (Real v : values)
    if (!std::isfinite(v)) throw error(errc::domain, "values must be finite");
  return detail::epsilon_closed_impl(values, [](std::size_t) { return Real(1); }, eps);
}

/// Two-input epsilon mean (u(u+eps) + v(v+eps)) / (u + v + 2 eps).
template <std::floating_point Real>
Real two_point_epsilon(Real u, Real v, Real eps) {
  const Real den = u + v + Real(2) * eps;
  if (den == Real(0)) throw error(errc::degenerate_input, "u + v + 2 eps vanishes");
  return (u * (u + eps) + v * (v + eps)) / den;
}

}  // namespace devfuse
