#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "devfuse/error.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

struct SsimConfig {
  std::size_t window = 8;
  double c1 = 1e-4;  // (0.01 L)^2, L = 1
  double c2 = 9e-4;  // (0.03 L)^2

  void validate() const {
    if (window < 2) throw error(errc::invalid_argument, "SSIM window must be >= 2");
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw error(errc::invalid_argument, "SSIM constants must be > 0");
  }
};

/// SSIM of two equally sized windows given as flattened samples. Variances
/// and covariance use the unbiased (count - 1) divisor.
inline double ssim_window(std::span<const double> x, std::span<const double> y,
                          const SsimConfig& cfg = {}) {
  if (x.size() != y.size()) throw error(errc::shape_mismatch, "SSIM windows differ in size");
  if (x.size() < 2) throw error(errc::invalid_argument, "SSIM window needs at least 2 samples");
  const double count = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= count;
  my /= count;
  double vx = 0.0;
  double vy = 0.0;
  double cxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= count - 1.0;
  vy /= count - 1.0;
  cxy /= count - 1.0;
  return ((2.0 * mx * my + cfg.c1) * (2.0 * cxy + cfg.c2)) /
         ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
}

/// Mean SSIM over all disjoint N x N windows and all channels. Both
/// dimensions must be multiples of N.
inline double ssim_image(const MultiMatrix& a, const MultiMatrix& b, const SsimConfig& cfg = {}) {
  cfg.validate();
  if (!a.same_shape(b)) throw error(errc::shape_mismatch, "SSIM images differ in shape");
  const std::size_t n = cfg.window;
  if (a.rows() % n != 0 || a.cols() % n != 0)
    throw error(errc::invalid_argument,
                "SSIM window " + std::to_string(n) + " does not divide the image; pad first");
  std::vector<double> wx(n * n);
  std::vector<double> wy(n * n);
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t k = 0; k < a.channels(); ++k)
    for (std::size_t bi = 0; bi < a.rows() / n; ++bi)
      for (std::size_t bj = 0; bj < a.cols() / n; ++bj) {
        detail::copy_block_channel(a, bi, bj, n, k, wx.data());
        detail::copy_block_channel(b, bi, bj, n, k, wy.data());
        total += ssim_window(wx, wy, cfg);
        ++terms;
      }
  return total / static_cast<double>(terms);
}

inline double mse(const MultiMatrix& a, const MultiMatrix& b) {
  if (!a.same_shape(b)) throw error(errc::shape_mismatch, "MSE images differ in shape");
  const auto da = a.data();
  const auto db = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

/// Nearest-neighbour magnification: every entry becomes an r x r tile.
inline MultiMatrix nn_magnify(const MultiMatrix& c, std::size_t r) {
  if (r < 2) throw error(errc::invalid_argument, "magnification factor must be >= 2");
  MultiMatrix out(c.rows() * r, c.cols() * r, c.channels());
  for (std::size_t k = 0; k < c.channels(); ++k)
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j, k) = c(i / r, j / r, k);
  return out;
}

}  // namespace devfuse
