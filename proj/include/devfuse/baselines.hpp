#pragma once

// Comparison reducers for block-wise image reduction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "devfuse/error.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

struct AggregatorId {
  enum class Kind { mean, median, gaussian, geometric_mean, k_alpha, centered_owa, min, max, penalty };

  Kind kind = Kind::mean;
  double alpha = 0.0;                   // k_alpha only
  std::vector<AggregatorId> candidates;  // penalty only

  static AggregatorId mean() { return {Kind::mean, 0.0, {}}; }
  static AggregatorId median() { return {Kind::median, 0.0, {}}; }
  static AggregatorId gaussian() { return {Kind::gaussian, 0.0, {}}; }
  static AggregatorId geometric_mean() { return {Kind::geometric_mean, 0.0, {}}; }
  static AggregatorId centered_owa() { return {Kind::centered_owa, 0.0, {}}; }
  static AggregatorId min() { return {Kind::min, 0.0, {}}; }
  static AggregatorId max() { return {Kind::max, 0.0, {}}; }

  static AggregatorId k_alpha(double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw error(errc::domain, "K_alpha needs alpha in [0, 1]");
    return {Kind::k_alpha, a, {}};
  }

  static std::vector<AggregatorId> default_penalty_candidates() {
    return {geometric_mean(), min(), max(), mean(), median()};
  }

  static AggregatorId penalty(std::vector<AggregatorId> c = default_penalty_candidates()) {
    if (c.empty()) throw error(errc::invalid_argument, "penalty needs at least one candidate");
    return {Kind::penalty, 0.0, std::move(c)};
  }

  std::string name() const {
    switch (kind) {
      case Kind::mean: return "mean";
      case Kind::median: return "median";
      case Kind::gaussian: return "gaussian";
      case Kind::geometric_mean: return "geomean";
      case Kind::k_alpha: {
        std::string s = std::to_string(alpha);
        s.erase(s.find_last_not_of('0') + 1);
        if (s.back() == '.') s.pop_back();
        return "k" + s;
      }
      case Kind::centered_owa: return "cowa";
      case Kind::min: return "min";
      case Kind::max: return "max";
      case Kind::penalty: return "penalty";
    }
    return "?";
  }
};

namespace detail {

inline void check_values(std::span<const double> values) {
  if (values.empty()) throw error(errc::invalid_argument, "cannot reduce an empty set");
}

// Weights of the centered OWA over m sorted inputs: min(i, m + 1 - i), normalized.
inline std::vector<double> centered_owa_weights(std::size_t m) {
  std::vector<double> w(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = static_cast<double>(std::min(i + 1, m - i));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

// Gaussian mask over an r x r grid, sigma = r / 2, centered on the block.
inline std::vector<double> gaussian_mask(std::size_t r) {
  const double sigma = static_cast<double>(r) / 2.0;
  const double c = (static_cast<double>(r) - 1.0) / 2.0;
  std::vector<double> w(r * r);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const double di = static_cast<double>(i) - c;
      const double dj = static_cast<double>(j) - c;
      w[i * r + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += w[i * r + j];
    }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace detail

/// Reduces one channel's values (a row-major r x r window for gaussian) to a
/// single number. Every reducer here is internal.
inline double reduce_plain(std::span<const double> values, const AggregatorId& id) {
  detail::check_values(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double m = static_cast<double>(values.size());
  using K = AggregatorId::Kind;

  switch (id.kind) {
    case K::mean:
      return std::clamp(std::accumulate(values.begin(), values.end(), 0.0) / m, lo, hi);
    case K::median: {
      std::vector<double> s(values.begin(), values.end());
      const auto mid = s.begin() + static_cast<std::ptrdiff_t>((s.size() - 1) / 2);
      std::nth_element(s.begin(), mid, s.end());
      return *mid;
    }
    case K::gaussian: {
      const auto r = static_cast<std::size_t>(std::llround(std::sqrt(m)));
      if (r * r != values.size())
        throw error(errc::invalid_argument, "gaussian reducer needs a square window");
      const auto w = detail::gaussian_mask(r);
      double acc = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) acc += w[i] * values[i];
      return std::clamp(acc, lo, hi);
    }
    case K::geometric_mean: {
      if (lo < 0.0) throw error(errc::domain, "geometric mean of a negative value");
      if (lo == 0.0) return 0.0;
      double log_sum = 0.0;
      for (double v : values) log_sum += std::log(v);
      return std::clamp(std::exp(log_sum / m), lo, hi);
    }
    case K::k_alpha:
      return std::clamp((1.0 - id.alpha) * lo + id.alpha * hi, lo, hi);
    case K::centered_owa: {
      std::vector<double> s(values.begin(), values.end());
      std::sort(s.begin(), s.end());
      const auto w = detail::centered_owa_weights(s.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * s[i];
      return std::clamp(acc, lo, hi);
    }
    case K::min:
      return lo;
    case K::max:
      return hi;
    case K::penalty:
      throw error(errc::invalid_argument, "penalty reducer works on whole blocks");
  }
  throw error(errc::invalid_argument, "unknown aggregator");
}

struct PenaltyResult {
  std::vector<double> values;          // chosen n-tuple
  std::vector<std::size_t> choice;     // candidate index per channel
  double penalty = 0.0;
  std::size_t assignments = 0;         // assignments actually scored
  std::vector<std::string> warnings;   // candidates skipped on error
};

/// Tries every assignment of one candidate per channel (|candidates|^n of
/// them, channel 0 most significant), evaluating the assigned aggregators on
/// each channel, and keeps the tuple with the smallest summed Euclidean
/// distance to the block's pixels. Ties keep the earliest.
inline PenaltyResult penalty_reduce(const Block& block, std::span<const AggregatorId> candidates) {
  if (candidates.empty()) throw error(errc::invalid_argument, "penalty needs at least one candidate");
  const std::size_t n = block.channels;
  const std::size_t nc = candidates.size();
  const std::size_t pixels = block.r * block.r;

  PenaltyResult result;
  std::vector<char> warned(n * nc, 0);
  std::vector<std::size_t> digits(n, 0);
  std::vector<double> y(n);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (;;) {
    bool usable = true;
    for (std::size_t k = 0; k < n && usable; ++k) {
      const std::size_t c = digits[k];
      try {
        y[k] = reduce_plain(block.channel(k), candidates[c]);
      } catch (const error& e) {
        usable = false;
        if (!warned[k * nc + c]) {
          warned[k * nc + c] = 1;
          result.warnings.push_back(candidates[c].name() + " skipped on channel " +
                                    std::to_string(k + 1) + ": " + e.what());
        }
      }
    }
    if (usable) {
      ++result.assignments;
      double cost = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) {
        double sq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double d = block.data[k * pixels + p] - y[k];
          sq += d * d;
        }
        cost += std::sqrt(sq);
      }
      if (cost < best) {
        best = cost;
        result.values = y;
        result.choice = digits;
        found = true;
      }
    }
    // Odometer step, last channel fastest.
    std::size_t k = n;
    while (k > 0 && ++digits[k - 1] == nc) {
      digits[k - 1] = 0;
      --k;
    }
    if (k == 0) break;
  }
  if (!found) throw error(errc::domain, "every penalty candidate failed on this block");
  result.penalty = best;
  return result;
}

/// Block-wise reduction of a whole matrix with one baseline. r must divide
/// both dimensions.
inline MultiMatrix reduce_blocks(const MultiMatrix& m, std::size_t r, const AggregatorId& id) {
  detail::check_tiling(m, r);
  const std::size_t nb_rows = m.rows() / r;
  const std::size_t nb_cols = m.cols() / r;
  MultiMatrix out(nb_rows, nb_cols, m.channels());
  if (id.kind == AggregatorId::Kind::penalty) {
    for (std::size_t a = 0; a < nb_rows; ++a)
      for (std::size_t b = 0; b < nb_cols; ++b) {
        const auto res = penalty_reduce(extract_block(m, a + 1, b + 1, r), id.candidates);
        for (std::size_t k = 0; k < m.channels(); ++k) out(a, b, k) = res.values[k];
      }
    return out;
  }
  std::vector<double> values(r * r);
  for (std::size_t k = 0; k < m.channels(); ++k)
    for (std::size_t a = 0; a < nb_rows; ++a)
      for (std::size_t b = 0; b < nb_cols; ++b) {
        detail::copy_block_channel(m, a, b, r, k, values.data());
        out(a, b, k) = reduce_plain(values, id);
      }
  return out;
}

}  // namespace devfuse
