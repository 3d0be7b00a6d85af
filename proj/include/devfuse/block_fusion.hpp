#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

/// How a weight enters the per-channel aggregation.
///  - deviation_weighted: root of sum_ij w_ij D(b_ij, y) = 0. A single scalar
///    per channel cancels out.
///  - input_scaled: the unweighted D-mean of the scaled block w * b.
enum class WeightMode { deviation_weighted, input_scaled };

struct WeightSpec {
  WeightMode mode = WeightMode::deviation_weighted;
  std::vector<double> channel;                 // one weight per channel
  std::vector<std::vector<double>> per_entry;  // one r*r row-major matrix per channel

  static WeightSpec unit() { return {}; }

  static WeightSpec channel_vector(std::vector<double> w,
                                   WeightMode mode = WeightMode::deviation_weighted) {
    WeightSpec s;
    s.mode = mode;
    s.channel = std::move(w);
    return s;
  }

  static WeightSpec per_entry_matrices(std::vector<std::vector<double>> w,
                                       WeightMode mode = WeightMode::deviation_weighted) {
    WeightSpec s;
    s.mode = mode;
    s.per_entry = std::move(w);
    return s;
  }

  void validate(std::size_t channels, std::size_t r) const {
    if (!channel.empty() && !per_entry.empty())
      throw error(errc::invalid_weights, "give either channel weights or per-entry weights");
    auto check = [](double w) {
      if (!std::isfinite(w) || w < 0.0)
        throw error(errc::invalid_weights, "weights must be finite and non-negative");
    };
    if (!channel.empty()) {
      if (channel.size() != channels)
        throw error(errc::invalid_weights, "channel weight vector has " +
                                               std::to_string(channel.size()) + " entries, need " +
                                               std::to_string(channels));
      for (double w : channel) check(w);
    }
    if (!per_entry.empty()) {
      if (per_entry.size() != channels)
        throw error(errc::invalid_weights, "need one weighting matrix per channel");
      for (const auto& mat : per_entry) {
        if (mat.size() != r * r)
          throw error(errc::invalid_weights, "weighting matrices must be r x r");
        for (double w : mat) check(w);
      }
    }
  }

  double at(std::size_t k, std::size_t idx) const {
    if (!channel.empty()) return channel[k];
    if (!per_entry.empty()) return per_entry[k][idx];
    return 1.0;
  }
};

/// (p/r) x (q/r) x n aggregational substitute.
using FusedMatrix = MultiMatrix;

namespace detail {

template <typename Fn>
auto annotate_block_errors(std::size_t alpha, std::size_t beta, std::size_t k, Fn&& fn) {
  try {
    return fn();
  } catch (const convergence_error& e) {
    throw convergence_error(std::string(e.what()) + " at block (" + std::to_string(alpha) + ", " +
                                std::to_string(beta) + "), channel " + std::to_string(k + 1),
                            e.bracket_lo(), e.bracket_hi());
  } catch (const error& e) {
    throw error(e.code(), std::string(e.what()) + " at block (" + std::to_string(alpha) + ", " +
                              std::to_string(beta) + "), channel " + std::to_string(k + 1));
  }
}

inline double aggregate_channel(const DeviationSpec& spec, std::span<const double> values,
                                std::span<const double> weights, const SolverConfig& cfg) {
  if (spec.is_epsilon()) return d_mean_epsilon_closed(values, weights, spec.epsilon_value());
  return d_mean_bisect(spec, values, weights, cfg);
}

}  // namespace detail

/// Replaces every disjoint r x r block of m by its per-channel weighted
/// deviation-based aggregation. r must divide both dimensions; pad first
/// otherwise. Block values are visited row-major, channels outermost.
inline FusedMatrix fuse(const MultiMatrix& m, std::size_t r, const DeviationSpec& spec,
                        const WeightSpec& weights = WeightSpec::unit(),
                        const SolverConfig& cfg = {}) {
  detail::check_tiling(m, r);
  weights.validate(m.channels(), r);
  const std::size_t nb_rows = m.rows() / r;
  const std::size_t nb_cols = m.cols() / r;
  FusedMatrix out(nb_rows, nb_cols, m.channels());

  const std::size_t count = r * r;
  std::vector<double> values(count);
  std::vector<double> w(count);
  const std::vector<double> ones(count, 1.0);

  for (std::size_t k = 0; k < m.channels(); ++k) {
    for (std::size_t a = 0; a < nb_rows; ++a) {
      for (std::size_t b = 0; b < nb_cols; ++b) {
        detail::copy_block_channel(m, a, b, r, k, values.data());
        for (std::size_t idx = 0; idx < count; ++idx) w[idx] = weights.at(k, idx);
        out(a, b, k) = detail::annotate_block_errors(a + 1, b + 1, k, [&] {
          if (weights.mode == WeightMode::input_scaled) {
            for (std::size_t idx = 0; idx < count; ++idx) values[idx] *= w[idx];
            return detail::aggregate_channel(spec, values, ones, cfg);
          }
          return detail::aggregate_channel(spec, values, w, cfg);
        });
      }
    }
  }
  return out;
}

}  // namespace devfuse
