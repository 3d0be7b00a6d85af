#pragma once

// MD / LMD pooling over H x W x C tensors.
//
// Each r x r window of channel c is reduced with the epsilon-deviation mean of
// the scaled activations u = w_c * b:
//
//   y = N / Dn,   N = sum u (u + eps),   Dn = sum (u + eps) = r^2 eps + sum u
//
// and the backward pass uses
//
//   dy/db_ij = w_c ((2 u_ij + eps) Dn - N) / Dn^2
//   dy/dw_c  = sum_ij b_ij ((2 u_ij + eps) Dn - N) / Dn^2

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

using Tensor3 = MultiMatrix;

enum class PoolMode { md, lmd };

struct PoolParams {
  std::size_t r = 2;
  double epsilon = 1.0;
  std::vector<double> weights;  // per channel; ignored (treated as 1) in md mode
  PoolMode mode = PoolMode::md;

  double weight(std::size_t c) const { return mode == PoolMode::md ? 1.0 : weights[c]; }

  void validate(std::size_t channels) const {
    if (r < 2) throw error(errc::invalid_argument, "pool window must be >= 2");
    if (!std::isfinite(epsilon) || epsilon < 1.0)
      throw error(errc::domain, "pooling epsilon must be finite and >= 1");
    if (mode == PoolMode::lmd) {
      if (weights.size() != channels)
        throw error(errc::invalid_weights, "LMD needs one weight per channel");
      for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w))
          throw error(errc::invalid_weights, "LMD weights must be positive");
    }
  }
};

struct PoolGradients {
  Tensor3 grad_input;
  std::vector<double> grad_weights;
};

inline Tensor3 md_pool_forward(const Tensor3& t, const PoolParams& p) {
  p.validate(t.channels());
  detail::check_tiling(t, p.r);
  const std::size_t oh = t.rows() / p.r;
  const std::size_t ow = t.cols() / p.r;
  Tensor3 out(oh, ow, t.channels());
  std::vector<double> u(p.r * p.r);
  for (std::size_t c = 0; c < t.channels(); ++c) {
    const double w = p.weight(c);
    for (std::size_t a = 0; a < oh; ++a)
      for (std::size_t b = 0; b < ow; ++b) {
        detail::copy_block_channel(t, a, b, p.r, c, u.data());
        for (double& v : u) v *= w;
        out(a, b, c) = d_mean_epsilon_closed<double>(u, p.epsilon);
      }
  }
  return out;
}

inline PoolGradients md_pool_backward(const Tensor3& t, const PoolParams& p,
                                      const Tensor3& grad_out) {
  p.validate(t.channels());
  detail::check_tiling(t, p.r);
  const std::size_t r = p.r;
  const std::size_t oh = t.rows() / r;
  const std::size_t ow = t.cols() / r;
  if (grad_out.rows() != oh || grad_out.cols() != ow || grad_out.channels() != t.channels())
    throw error(errc::shape_mismatch, "upstream gradient has the wrong shape");

  PoolGradients g{Tensor3(t.rows(), t.cols(), t.channels()),
                  std::vector<double>(t.channels(), 0.0)};
  const double eps = p.epsilon;
  std::vector<double> b(r * r);
  for (std::size_t c = 0; c < t.channels(); ++c) {
    const double w = p.weight(c);
    double gw = 0.0;
    for (std::size_t a = 0; a < oh; ++a)
      for (std::size_t bb = 0; bb < ow; ++bb) {
        detail::copy_block_channel(t, a, bb, r, c, b.data());
        double num = 0.0;
        double den = 0.0;
        for (double v : b) {
          const double u = w * v;
          num += u * (u + eps);
          den += u + eps;
        }
        if (den == 0.0) throw error(errc::degenerate_input, "pool window denominator vanishes");
        const double upstream = grad_out(a, bb, c);
        const double den2 = den * den;
        double window_gw = 0.0;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < r; ++j) {
            const double v = b[i * r + j];
            const double dy_du = ((2.0 * w * v + eps) * den - num) / den2;
            g.grad_input(a * r + i, bb * r + j, c) = upstream * w * dy_du;
            window_gw += v * dy_du;
          }
        gw += upstream * window_gw;
      }
    g.grad_weights[c] = gw;
  }
  return g;
}

}  // namespace devfuse
