#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "devfuse/block_fusion.hpp"
#include "devfuse/pooling.hpp"
#include "support.hpp"

using namespace devfuse;
using devfuse::testing::Gen;

namespace {

// Scalar loss L = sum grad_out * forward(t), differentiated by central differences.
double loss(const Tensor3& t, const PoolParams& p, const Tensor3& g) {
  const auto y = md_pool_forward(t, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * g.data()[i];
  return acc;
}

struct FdGrad {
  std::vector<double> input;
  std::vector<double> weights;
};

FdGrad finite_difference(const Tensor3& t, const PoolParams& p, const Tensor3& g, double h) {
  FdGrad fd;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto plus = t, minus = t;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    fd.input.push_back((loss(plus, p, g) - loss(minus, p, g)) / (2 * h));
  }
  for (std::size_t c = 0; c < p.weights.size(); ++c) {
    auto plus = p, minus = p;
    plus.weights[c] += h;
    minus.weights[c] -= h;
    fd.weights.push_back((loss(t, plus, g) - loss(t, minus, g)) / (2 * h));
  }
  return fd;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

}  // namespace

TEST(MdPoolForward, Examples) {
  const Tensor3 t(2, 2, 1, std::vector<double>{0, 1, 1, 0});
  PoolParams p;
  EXPECT_NEAR(md_pool_forward(t, p)(0, 0, 0), 2.0 / 3.0, 1e-15);
  p.mode = PoolMode::lmd;
  p.weights = {2.0};
  EXPECT_NEAR(md_pool_forward(t, p)(0, 0, 0), 1.5, 1e-15);

  const Tensor3 flat(4, 6, 2, 0.3);
  const auto pooled = md_pool_forward(flat, PoolParams{});
  for (double v : pooled.data()) EXPECT_EQ(v, 0.3);
}

TEST(MdPoolForward, Validation) {
  const Tensor3 t(4, 4, 2, 0.5);
  PoolParams p;
  p.epsilon = 0.5;
  EXPECT_THROW(md_pool_forward(t, p), error);
  p = {};
  p.mode = PoolMode::lmd;
  p.weights = {1.0};
  EXPECT_THROW(md_pool_forward(t, p), error);
  p.weights = {1.0, -1.0};
  EXPECT_THROW(md_pool_forward(t, p), error);
  p = {};
  p.r = 3;
  EXPECT_THROW(md_pool_forward(t, p), error);
}

TEST(MdPoolForward, InternalityAtUnitWeight) {
  Gen g(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 2 + g.index(2);
    const auto t = g.matrix(r * 3, r * 2, 2);
    PoolParams p;
    p.r = r;
    p.epsilon = 1.0 + g.index(32);
    const auto y = md_pool_forward(t, p);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
          const auto iv = block_interval(extract_block(t, a + 1, b + 1, r), c);
          EXPECT_TRUE(iv.contains(y(a, b, c)));
        }
  }
}

TEST(MdPoolForward, BitIdenticalToFuse) {
  Gen g(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 2 + g.index(3);
    const auto t = g.matrix(r * (1 + g.index(4)), r * (1 + g.index(4)), 1 + g.index(4));
    PoolParams p;
    p.r = r;
    p.epsilon = std::vector<double>{1, 2, 4, 32}[g.index(4)];
    const auto pooled = md_pool_forward(t, p);
    const auto fused = fuse(t, r, DeviationSpec::epsilon(p.epsilon));
    EXPECT_EQ(pooled, fused);
  }
}

TEST(MdPoolForward, LargeEpsilonIsAveragePooling) {
  Gen g(43);
  const auto t = g.matrix(8, 8, 3);
  PoolParams p;
  p.epsilon = 1e6;
  const auto y = md_pool_forward(t, p);
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        const double avg = (t(2 * a, 2 * b, c) + t(2 * a + 1, 2 * b, c) + t(2 * a, 2 * b + 1, c) +
                            t(2 * a + 1, 2 * b + 1, c)) / 4;
        worst = std::max(worst, std::abs(y(a, b, c) - avg));
      }
  EXPECT_LT(worst, 1e-4);
}

TEST(MdPoolBackward, ZeroUpstreamGivesZero) {
  Gen g(44);
  const auto t = g.matrix(4, 4, 2);
  PoolParams p;
  p.mode = PoolMode::lmd;
  p.weights = {0.7, 1.3};
  const auto grads = md_pool_backward(t, p, Tensor3(2, 2, 2, 0.0));
  for (double v : grads.grad_input.data()) EXPECT_EQ(v, 0.0);
  for (double v : grads.grad_weights) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(md_pool_backward(t, p, Tensor3(2, 2, 1, 0.0)), error);
}

TEST(MdPoolBackward, SingleWindowAgainstFiniteDifferences) {
  const Tensor3 t(2, 2, 1, std::vector<double>{0, 1, 1, 0});
  PoolParams p;
  p.mode = PoolMode::lmd;
  p.weights = {1.0};
  const Tensor3 up(1, 1, 1, 1.0);
  const auto grads = md_pool_backward(t, p, up);
  const auto fd = finite_difference(t, p, up, 1e-6);
  std::vector<double> gi(grads.grad_input.data().begin(), grads.grad_input.data().end());
  EXPECT_LT(rel_error(gi, fd.input), 1e-6);
  EXPECT_LT(rel_error(grads.grad_weights, fd.weights), 1e-6);
}

TEST(MdPoolBackward, ConstantWindowClosedForm) {
  for (const double c : {0.0, 0.25, 0.8})
    for (const double eps : {1.0, 2.0, 32.0})
      for (const std::size_t r : {2u, 3u}) {
        const Tensor3 t(r, r, 1, c);
        PoolParams p;
        p.r = r;
        p.epsilon = eps;
        const auto grads = md_pool_backward(t, p, Tensor3(1, 1, 1, 1.0));
        const double n = static_cast<double>(r * r);
        const double want = ((2 * c + eps) * (n * eps + n * c) - n * c * (c + eps)) /
                            ((n * eps + n * c) * (n * eps + n * c));
        for (double v : grads.grad_input.data()) EXPECT_NEAR(v, want, 1e-15);
      }
}

TEST(MdPoolBackward, RandomTrialsAgainstFiniteDifferences) {
  Gen g(45);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 2 + g.index(2);
    const std::size_t channels = 1 + g.index(3);
    const auto t = g.matrix(r * (1 + g.index(2)), r * (1 + g.index(2)), channels);
    PoolParams p;
    p.r = r;
    p.epsilon = std::vector<double>{1, 2, 32}[g.index(3)];
    p.mode = PoolMode::lmd;
    p.weights = g.vec(channels, 0.5, 2.0);
    const auto up = g.matrix(t.rows() / r, t.cols() / r, channels, 0.1, 1.0);
    const auto grads = md_pool_backward(t, p, up);
    const auto fd = finite_difference(t, p, up, 1e-6);
    std::vector<double> gi(grads.grad_input.data().begin(), grads.grad_input.data().end());
    EXPECT_LT(rel_error(gi, fd.input), 1e-6);
    EXPECT_LT(rel_error(grads.grad_weights, fd.weights), 1e-6);
  }
}
