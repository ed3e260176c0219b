#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <kylelab/parallel.hpp>
#include <kylelab/rng.hpp>

using namespace kylelab;

// Known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Substream, DeterministicAndDistinct) {
  Substream a(42, 0, 7), b(42, 0, 7), c(42, 0, 8), d(42, 1, 7), e(43, 0, 7);
  for (int n = 0; n < 100; ++n) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    const double y = c.normal(), z = d.normal(), w = e.normal();
    EXPECT_NE(x, y);
    EXPECT_NE(x, z);
    EXPECT_NE(x, w);
  }
}

TEST(Substream, UniformInOpenInterval) {
  Substream s(1, 2, 3);
  for (int n = 0; n < 100000; ++n) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Substream, NormalMoments) {
  const int n = 1000000;
  double s1 = 0, s2 = 0, s4 = 0;
  Substream s(99, 0, 0);
  for (int k = 0; k < n; ++k) {
    const double x = s.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_LT(std::abs(s1 / n), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(s2 / n - 1), 5.0 * std::sqrt(2.0 / n));
  EXPECT_LT(std::abs(s4 / n - 3), 5.0 * std::sqrt(96.0 / n));
}

TEST(ParallelFor, StaticPartitionCoversEveryIndexOnce) {
  for (int threads : {1, 2, 3, 8}) {
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}

TEST(ParallelFor, RethrowsWorkerExceptions) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 63) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
