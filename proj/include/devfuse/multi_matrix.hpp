#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"

namespace devfuse {

/// p x q grid of real n-tuples. Storage is planar: each channel is a
/// row-major p x q plane, planes stored one after the other.
class MultiMatrix {
 public:
  MultiMatrix() = default;

  MultiMatrix(std::size_t rows, std::size_t cols, std::size_t channels, double fill = 0.0)
      : rows_(rows), cols_(cols), channels_(channels), data_(rows * cols * channels, fill) {
    if (rows == 0 || cols == 0 || channels == 0)
      throw error(errc::invalid_argument, "matrix dimensions must be >= 1");
  }

  MultiMatrix(std::size_t rows, std::size_t cols, std::size_t channels, std::vector<double> data)
      : rows_(rows), cols_(cols), channels_(channels), data_(std::move(data)) {
    if (rows == 0 || cols == 0 || channels == 0)
      throw error(errc::invalid_argument, "matrix dimensions must be >= 1");
    if (data_.size() != rows * cols * channels)
      throw error(errc::shape_mismatch, "data size does not match rows*cols*channels");
    for (double v : data_)
      if (!std::isfinite(v)) throw error(errc::domain, "matrix entries must be finite");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(k * rows_ + i) * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(k * rows_ + i) * cols_ + j];
  }

  std::span<double> plane(std::size_t k) {
    return {data_.data() + k * rows_ * cols_, rows_ * cols_};
  }
  std::span<const double> plane(std::size_t k) const {
    return {data_.data() + k * rows_ * cols_, rows_ * cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const MultiMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && channels_ == o.channels_;
  }

  friend bool operator==(const MultiMatrix&, const MultiMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Single-channel p x q plane.
struct Plane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline std::vector<Plane> split_channels(const MultiMatrix& m) {
  std::vector<Plane> planes;
  planes.reserve(m.channels());
  for (std::size_t k = 0; k < m.channels(); ++k) {
    const auto src = m.plane(k);
    planes.push_back(Plane{m.rows(), m.cols(), std::vector<double>(src.begin(), src.end())});
  }
  return planes;
}

inline MultiMatrix stack_channels(std::span<const Plane> planes) {
  if (planes.empty()) throw error(errc::invalid_argument, "cannot stack zero planes");
  MultiMatrix m(planes.front().rows, planes.front().cols, planes.size());
  for (std::size_t k = 0; k < planes.size(); ++k) {
    if (planes[k].rows != m.rows() || planes[k].cols != m.cols() ||
        planes[k].data.size() != m.rows() * m.cols())
      throw error(errc::shape_mismatch, "planes differ in shape");
    std::copy(planes[k].data.begin(), planes[k].data.end(), m.plane(k).begin());
  }
  return m;
}

/// One r x r x n window of a MultiMatrix. `alpha`/`beta` are the 1-based
/// block coordinates; storage is planar like MultiMatrix.
struct Block {
  std::size_t r = 0;
  std::size_t channels = 0;
  std::size_t alpha = 0;
  std::size_t beta = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(k * r + i) * r + j];
  }
  std::span<const double> channel(std::size_t k) const {
    return {data.data() + k * r * r, r * r};
  }
};

namespace detail {

inline void check_tiling(const MultiMatrix& m, std::size_t r) {
  if (r < 2) throw error(errc::invalid_argument, "block size r must be >= 2");
  if (m.rows() % r != 0 || m.cols() % r != 0)
    throw error(errc::invalid_argument, "r = " + std::to_string(r) + " does not divide " +
                                            std::to_string(m.rows()) + "x" +
                                            std::to_string(m.cols()));
}

// Copies block (a, b) (0-based) channel k into out[0 .. r*r), row-major.
inline void copy_block_channel(const MultiMatrix& m, std::size_t a, std::size_t b, std::size_t r,
                               std::size_t k, double* out) {
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) out[i * r + j] = m(a * r + i, b * r + j, k);
}

}  // namespace detail

/// Block (alpha, beta), 1-based, of the r x r tiling of m.
inline Block extract_block(const MultiMatrix& m, std::size_t alpha, std::size_t beta,
                           std::size_t r) {
  detail::check_tiling(m, r);
  const std::size_t nb_rows = m.rows() / r;
  const std::size_t nb_cols = m.cols() / r;
  if (alpha < 1 || alpha > nb_rows || beta < 1 || beta > nb_cols)
    throw error(errc::index, "block (" + std::to_string(alpha) + ", " + std::to_string(beta) +
                                 ") outside " + std::to_string(nb_rows) + "x" +
                                 std::to_string(nb_cols));
  Block blk{r, m.channels(), alpha, beta, std::vector<double>(r * r * m.channels())};
  for (std::size_t k = 0; k < m.channels(); ++k)
    detail::copy_block_channel(m, alpha - 1, beta - 1, r, k, blk.data.data() + k * r * r);
  return blk;
}

/// [min, max] of channel k (0-based) of the block.
inline Interval block_interval(const Block& b, std::size_t k) {
  if (k >= b.channels) throw error(errc::index, "channel index out of range");
  const auto ch = b.channel(k);
  const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
  return Interval(*lo, *hi);
}

enum class PadMode { replicate, zero };

inline std::size_t round_up(std::size_t v, std::size_t r) { return (v + r - 1) / r * r; }

/// Pads to the least multiples of r; original content stays at the origin.
inline MultiMatrix pad(const MultiMatrix& m, std::size_t r, PadMode mode = PadMode::replicate) {
  if (r < 2) throw error(errc::invalid_argument, "pad needs r >= 2");
  const std::size_t rows = round_up(m.rows(), r);
  const std::size_t cols = round_up(m.cols(), r);
  if (rows == m.rows() && cols == m.cols()) return m;
  MultiMatrix out(rows, cols, m.channels());
  for (std::size_t k = 0; k < m.channels(); ++k)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        if (i < m.rows() && j < m.cols())
          out(i, j, k) = m(i, j, k);
        else if (mode == PadMode::replicate)
          out(i, j, k) = m(std::min(i, m.rows() - 1), std::min(j, m.cols() - 1), k);
      }
  return out;
}

/// Top-left rows x cols corner of m.
inline MultiMatrix crop(const MultiMatrix& m, std::size_t rows, std::size_t cols) {
  if (rows > m.rows() || cols > m.cols())
    throw error(errc::shape_mismatch, "crop larger than source");
  MultiMatrix out(rows, cols, m.channels());
  for (std::size_t k = 0; k < m.channels(); ++k)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out(i, j, k) = m(i, j, k);
  return out;
}

}  // namespace devfuse
