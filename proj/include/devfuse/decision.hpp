#pragma once

// Multi-expert decision making: expert preference matrices are fused entry by
// entry into a collective matrix, each row of which is then reduced to a
// preference score used to rank the alternatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"

namespace devfuse {

/// p x p x n stack of expert preference matrices. x(i, j, k) is expert k's
/// preference of alternative i over alternative j.
class PreferenceTensor {
 public:
  PreferenceTensor(std::size_t alternatives, std::size_t experts, double diagonal_value = 0.5)
      : p_(alternatives),
        n_(experts),
        diagonal_(diagonal_value),
        data_(alternatives * alternatives * experts, 0.0) {
    if (p_ < 2) throw error(errc::invalid_argument, "need at least two alternatives");
    if (n_ < 1) throw error(errc::invalid_argument, "need at least one expert");
    if (!(diagonal_ >= 0.0 && diagonal_ <= 1.0))
      throw error(errc::domain, "diagonal value must lie in [0, 1]");
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t i = 0; i < p_; ++i) (*this)(i, i, k) = diagonal_;
  }

  std::size_t alternatives() const { return p_; }
  std::size_t experts() const { return n_; }
  double diagonal_value() const { return diagonal_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(k * p_ + i) * p_ + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(k * p_ + i) * p_ + j];
  }

  /// Sets expert k's matrix (row-major p*p); the diagonal must carry the
  /// fixed value and every entry must lie in [0, 1].
  void set_expert(std::size_t k, const std::vector<std::vector<double>>& matrix) {
    if (k >= n_) throw error(errc::index, "expert index out of range");
    if (matrix.size() != p_) throw error(errc::shape_mismatch, "expert matrix must be p x p");
    for (std::size_t i = 0; i < p_; ++i) {
      if (matrix[i].size() != p_) throw error(errc::shape_mismatch, "expert matrix must be p x p");
      for (std::size_t j = 0; j < p_; ++j) {
        const double v = matrix[i][j];
        if (!(v >= 0.0 && v <= 1.0))
          throw error(errc::domain, "preferences must lie in [0, 1]");
        if (i == j && v != diagonal_)
          throw error(errc::invalid_argument, "diagonal entry (" + std::to_string(i + 1) + ", " +
                                                  std::to_string(i + 1) + ") of expert " +
                                                  std::to_string(k + 1) + " must equal " +
                                                  std::to_string(diagonal_));
        (*this)(i, j, k) = v;
      }
    }
  }

  void validate() const {
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t i = 0; i < p_; ++i)
        for (std::size_t j = 0; j < p_; ++j) {
          const double v = (*this)(i, j, k);
          if (!(v >= 0.0 && v <= 1.0)) throw error(errc::domain, "preferences must lie in [0, 1]");
          if (i == j && v != diagonal_)
            throw error(errc::invalid_argument, "diagonal must carry the fixed value");
        }
  }

 private:
  std::size_t p_;
  std::size_t n_;
  double diagonal_;
  std::vector<double> data_;
};

struct CollectiveMatrix {
  std::size_t p = 0;
  std::vector<double> data;  // row-major p x p

  double operator()(std::size_t i, std::size_t j) const { return data[i * p + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * p, p}; }
};

struct PreferenceColumn {
  std::vector<double> d;
  std::vector<std::size_t> ranking;  // 0-based, most preferred first
};

/// c_ij = sum_k w_k x_ijk (x_ijk + eps) / sum_k w_k (x_ijk + eps).
inline CollectiveMatrix collective_matrix(const PreferenceTensor& x,
                                          std::span<const double> weights, double eps) {
  x.validate();
  if (weights.size() != x.experts())
    throw error(errc::invalid_weights, "need one weight per expert");
  const std::size_t p = x.alternatives();
  CollectiveMatrix c{p, std::vector<double>(p * p)};
  std::vector<double> prefs(x.experts());
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < x.experts(); ++k) prefs[k] = x(i, j, k);
      c.data[i * p + j] = d_mean_epsilon_closed<double>(prefs, weights, eps);
    }
  return c;
}

/// Indices sorted by score, highest first; equal scores keep index order.
inline std::vector<std::size_t> rank_alternatives(std::span<const double> d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  return order;
}

/// d_i = sum_j c_ij (c_ij + eps) / (eps p + sum_j c_ij), diagonal included.
inline PreferenceColumn preference_column(const CollectiveMatrix& c, double eps) {
  PreferenceColumn col;
  col.d.resize(c.p);
  for (std::size_t i = 0; i < c.p; ++i) col.d[i] = d_mean_epsilon_closed<double>(c.row(i), eps);
  col.ranking = rank_alternatives(col.d);
  return col;
}

}  // namespace devfuse
