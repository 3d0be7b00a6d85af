#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "devfuse/block_fusion.hpp"
#include "devfuse/multi_matrix.hpp"
#include "support.hpp"

using namespace devfuse;
using devfuse::testing::Gen;

namespace {

MultiMatrix counting_matrix(std::size_t rows, std::size_t cols, std::size_t channels) {
  MultiMatrix m(rows, cols, channels);
  double v = 0;
  for (std::size_t k = 0; k < channels; ++k)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) m(i, j, k) = v++;
  return m;
}

}  // namespace

TEST(MultiMatrix, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(MultiMatrix(0, 2, 1), error);
  EXPECT_THROW(MultiMatrix(1, 2, 1, std::vector<double>{0.0, NAN}), error);
  EXPECT_THROW(MultiMatrix(1, 2, 1, std::vector<double>{0.0}), error);
}

TEST(SplitChannels, ShapesAndRoundTrip) {
  Gen g(1);
  const auto single = g.matrix(3, 4, 1);
  const auto planes1 = split_channels(single);
  ASSERT_EQ(planes1.size(), 1u);
  EXPECT_EQ(planes1[0].data, std::vector<double>(single.data().begin(), single.data().end()));

  const auto m = g.matrix(2, 2, 3);
  const auto planes = split_channels(m);
  ASSERT_EQ(planes.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(planes[k].rows, 2u);
    EXPECT_EQ(planes[k].cols, 2u);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(planes[k](i, j), m(i, j, k));
  }
  EXPECT_EQ(stack_channels(planes), m);
}

TEST(ExtractBlock, CornersAndIndexErrors) {
  const auto m = counting_matrix(4, 4, 1);
  const auto tl = extract_block(m, 1, 1, 2);
  EXPECT_EQ(tl.data, (std::vector<double>{0, 1, 4, 5}));
  const auto br = extract_block(m, 2, 2, 2);
  EXPECT_EQ(br.data, (std::vector<double>{10, 11, 14, 15}));
  EXPECT_EQ(br.alpha, 2u);
  EXPECT_EQ(br.beta, 2u);
  try {
    extract_block(m, 3, 1, 2);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::index);
  }
  EXPECT_THROW(extract_block(m, 0, 1, 2), error);
  EXPECT_THROW(extract_block(counting_matrix(5, 4, 1), 1, 1, 2), error);
}

TEST(ExtractBlock, BlocksTileTheMatrix) {
  const auto m = counting_matrix(6, 9, 2);
  std::multiset<double> seen;
  for (std::size_t a = 1; a <= 2; ++a)
    for (std::size_t b = 1; b <= 3; ++b) {
      const auto blk = extract_block(m, a, b, 3);
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(blk(i, j, k), m((a - 1) * 3 + i, (b - 1) * 3 + j, k));
            seen.insert(blk(i, j, k));
          }
    }
  ASSERT_EQ(seen.size(), m.size());
  for (double v : m.data()) EXPECT_EQ(seen.count(v), 1u);
}

TEST(BlockInterval, MinMaxScan) {
  MultiMatrix m(2, 2, 2, std::vector<double>{0.1, 0.9, 0.4, 0.5, 0.3, 0.3, 0.3, 0.3});
  const auto blk = extract_block(m, 1, 1, 2);
  const auto i0 = block_interval(blk, 0);
  EXPECT_EQ(i0.lo, 0.1);
  EXPECT_EQ(i0.hi, 0.9);
  const auto i1 = block_interval(blk, 1);
  EXPECT_EQ(i1.lo, 0.3);
  EXPECT_EQ(i1.hi, 0.3);
  EXPECT_THROW(block_interval(blk, 2), error);
}

TEST(Pad, Dimensions) {
  Gen g(2);
  const auto m55 = g.matrix(5, 5, 1);
  const auto p = pad(m55, 2);
  EXPECT_EQ(p.rows(), 6u);
  EXPECT_EQ(p.cols(), 6u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(p(i, 5, 0), m55(i, 4, 0));
    EXPECT_EQ(p(5, i, 0), m55(4, i, 0));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(p(i, j, 0), m55(i, j, 0));
  }
  EXPECT_EQ(p(5, 5, 0), m55(4, 4, 0));

  const auto m44 = g.matrix(4, 4, 1);
  EXPECT_EQ(pad(m44, 2), m44);

  const auto m573 = g.matrix(5, 7, 3);
  const auto p3 = pad(m573, 3);
  EXPECT_EQ(p3.rows(), 6u);
  EXPECT_EQ(p3.cols(), 9u);
  EXPECT_EQ(p3.channels(), 3u);

  const auto z = pad(m55, 2, PadMode::zero);
  EXPECT_EQ(z(5, 5, 0), 0.0);
}

TEST(Fuse, HandEvaluatedBlock) {
  MultiMatrix m(2, 2, 1, std::vector<double>{0, 1, 1, 0});
  const auto c = fuse(m, 2, DeviationSpec::epsilon(1.0));
  ASSERT_EQ(c.rows(), 1u);
  EXPECT_NEAR(c(0, 0, 0), 2.0 / 3.0, 1e-15);
}

TEST(Fuse, ConstantMatrixIsFixed) {
  MultiMatrix m(6, 4, 3, 0.42);
  for (const auto& spec : {DeviationSpec::epsilon(1.0), DeviationSpec::linear(),
                           DeviationSpec::basic(MonotoneMap::odd_power(3), MonotoneMap::identity())}) {
    const auto c = fuse(m, 2, spec);
    for (double v : c.data()) EXPECT_EQ(v, 0.42);
  }
}

TEST(Fuse, ChannelScalarCancelsInDeviationWeightedMode) {
  Gen g(5);
  const auto m = g.matrix(8, 6, 3);
  const auto unit = fuse(m, 2, DeviationSpec::epsilon(2.0));
  const auto scaled =
      fuse(m, 2, DeviationSpec::epsilon(2.0), WeightSpec::channel_vector({3.5, 3.5, 3.5}));
  const auto mixed =
      fuse(m, 2, DeviationSpec::epsilon(2.0), WeightSpec::channel_vector({0.2, 7.0, 1.0}));
  for (std::size_t i = 0; i < unit.size(); ++i) {
    EXPECT_NEAR(unit.data()[i], scaled.data()[i], 1e-14);
    EXPECT_NEAR(unit.data()[i], mixed.data()[i], 1e-14);
  }
}

TEST(Fuse, InputScaledWeightChangesOutput) {
  MultiMatrix blk(2, 2, 1, std::vector<double>{0, 1, 0, 1});
  const auto spec = DeviationSpec::epsilon(1.0);
  const auto w1 = fuse(blk, 2, spec, WeightSpec::channel_vector({1.0}, WeightMode::input_scaled));
  const auto w2 = fuse(blk, 2, spec, WeightSpec::channel_vector({2.0}, WeightMode::input_scaled));
  // w=1: (0 + 2 + 0 + 2) / (1 + 2 + 1 + 2) = 2/3; w=2: (0 + 6 + 0 + 6) / (4 + 4) = 1.5
  EXPECT_NEAR(w1(0, 0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w2(0, 0, 0), 1.5, 1e-15);
}

TEST(Fuse, PerEntryWeightsMatchDirectAggregation) {
  Gen g(6);
  const auto m = g.matrix(4, 4, 2);
  std::vector<std::vector<double>> w{g.vec(4, 0.1, 2.0), g.vec(4, 0.1, 2.0)};
  const auto spec = DeviationSpec::epsilon(4.0);
  const auto c = fuse(m, 2, spec, WeightSpec::per_entry_matrices(w));
  for (std::size_t a = 1; a <= 2; ++a)
    for (std::size_t b = 1; b <= 2; ++b) {
      const auto blk = extract_block(m, a, b, 2);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto ch = blk.channel(k);
        EXPECT_NEAR(c(a - 1, b - 1, k), d_mean_bisect(spec, ch, w[k]), 1e-8);
      }
    }
}

TEST(Fuse, NonEpsilonSpecUsesBisection) {
  Gen g(7);
  const auto m = g.matrix(4, 4, 1);
  const auto c = fuse(m, 2, DeviationSpec::linear());
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      const double mean =
          (m(2 * a, 2 * b, 0) + m(2 * a, 2 * b + 1, 0) + m(2 * a + 1, 2 * b, 0) + m(2 * a + 1, 2 * b + 1, 0)) / 4;
      EXPECT_NEAR(c(a, b, 0), mean, 1e-9);
    }
}

TEST(Fuse, InternalityAndLocality) {
  Gen g(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t r = 2 + g.index(3);
    auto m = g.matrix(r * (1 + g.index(4)), r * (1 + g.index(4)), 1 + g.index(3));
    const auto spec = DeviationSpec::epsilon(1.0 + g.index(32));
    const auto w = WeightSpec::channel_vector(g.vec(m.channels(), 0.1, 4.0));
    const auto c = fuse(m, r, spec, w);
    for (std::size_t k = 0; k < m.channels(); ++k)
      for (std::size_t a = 0; a < c.rows(); ++a)
        for (std::size_t b = 0; b < c.cols(); ++b) {
          const auto iv = block_interval(extract_block(m, a + 1, b + 1, r), k);
          EXPECT_TRUE(iv.contains(c(a, b, k)));
        }
    // Perturb one pixel: only its block/channel may change.
    const std::size_t pi = g.index(m.rows()), pj = g.index(m.cols()), pk = g.index(m.channels());
    m(pi, pj, pk) = g.uniform();
    const auto c2 = fuse(m, r, spec, w);
    for (std::size_t k = 0; k < m.channels(); ++k)
      for (std::size_t a = 0; a < c.rows(); ++a)
        for (std::size_t b = 0; b < c.cols(); ++b)
          if (!(k == pk && a == pi / r && b == pj / r)) {
            EXPECT_EQ(c(a, b, k), c2(a, b, k));
          }
  }
}

TEST(Fuse, ExampleShape100x40) {
  Gen g(9);
  const auto m = g.matrix(100, 40, 3);
  const auto c = fuse(m, 2, DeviationSpec::epsilon(1.0));
  EXPECT_EQ(c.rows(), 50u);
  EXPECT_EQ(c.cols(), 20u);
  EXPECT_EQ(c.channels(), 3u);
  EXPECT_EQ(c.rows() * c.cols(), 1000u);
}

TEST(Fuse, PaddedPipelineAcceptsAnySize) {
  Gen g(10);
  for (std::size_t p = 1; p <= 7; ++p)
    for (std::size_t q = 1; q <= 7; ++q) {
      const auto m = g.matrix(p, q, 2);
      const auto c = fuse(pad(m, 3), 3, DeviationSpec::epsilon(2.0));
      EXPECT_EQ(c.rows(), (p + 2) / 3);
      EXPECT_EQ(c.cols(), (q + 2) / 3);
    }
}

TEST(Fuse, ErrorsCarryBlockCoordinates) {
  // Left block is constant and needs no iterations; the right one exhausts the budget.
  MultiMatrix m(2, 4, 1, std::vector<double>{0.1, 0.1, 0.1, 0.9, 0.1, 0.1, 0.3, 0.4});
  SolverConfig cfg;
  cfg.max_iterations = 2;
  try {
    fuse(m, 2, DeviationSpec::linear(), WeightSpec::unit(), cfg);
    FAIL();
  } catch (const convergence_error& e) {
    EXPECT_NE(std::string(e.what()).find("block (1, 2), channel 1"), std::string::npos) << e.what();
    EXPECT_LT(e.bracket_lo(), e.bracket_hi());
  }
  std::vector<std::vector<double>> zero{{0, 0, 0, 0}};
  try {
    fuse(m, 2, DeviationSpec::epsilon(1.0), WeightSpec::per_entry_matrices(zero));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::invalid_weights);
  }
  EXPECT_THROW(fuse(m, 2, DeviationSpec::epsilon(1.0), WeightSpec::channel_vector({1, 2})), error);
  EXPECT_THROW(fuse(m, 3, DeviationSpec::epsilon(1.0)), error);
}
