#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <kylelab/hamiltonian.hpp>
#include <kylelab/simulate.hpp>
#include <kylelab/stats.hpp>

using namespace kylelab;

namespace {

MarketModel two_types(double T = 1.0) {
  MarketModel m;
  m.num_types = 2;
  m.values = {1, -1};
  m.prior = {0.5, 0.5};
  m.horizon = T;
  return m;
}

MarketModel three_uniform() {
  MarketModel m;
  m.num_types = 3;
  m.values = {-1, 0, 1};
  m.prior = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  close_simplex(m.prior);
  m.horizon = 1.0;
  return m;
}

double left_sum(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return s;
}

}  // namespace

TEST(GenPaths, DeterministicAndPrefixStable) {
  const PathBundle a = gen_paths(2, 4, 1.0, 42);
  const PathBundle b = gen_paths(2, 4, 1.0, 42);
  EXPECT_EQ(a.dB, b.dB);
  const PathBundle c = gen_paths(4, 4, 1.0, 42);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(a.dB[k], c.dB[k]);
  const PathBundle d = gen_paths(4, 4, 1.0, 42, 0, 3);
  EXPECT_EQ(c.dB, d.dB);
  EXPECT_NE(gen_paths(2, 4, 1.0, 43).dB, a.dB);
}

TEST(GenPaths, IncrementMoments) {
  const PathBundle b = gen_paths(1000000, 1, 1.0, 42);
  const Estimate m = sample_mean(b.dB);
  EXPECT_LT(std::abs(m.mean), 5.0 * std::sqrt(b.dt()) / 1e3);
  double s2 = 0;
  for (double x : b.dB) s2 += x * x;
  EXPECT_LT(std::abs(s2 / b.dB.size() - b.dt()), 5.0 * std::sqrt(2.0) * b.dt() / 1e3);
}

TEST(GenPaths, CoarsenSumsIncrements) {
  const PathBundle b = gen_paths(3, 8, 2.0, 5);
  const PathBundle c = b.coarsen(4);
  EXPECT_EQ(c.num_steps, 2);
  EXPECT_DOUBLE_EQ(c.dt(), 1.0);
  EXPECT_NEAR(c.dB[1], b.dB[4] + b.dB[5] + b.dB[6] + b.dB[7], 1e-15);
  EXPECT_THROW(b.coarsen(3), std::exception);
}

TEST(Girsanov, Examples) {
  const std::vector<double> zero(5, 0.0), dB{0.1, -0.3, 0.2, 0.5, -0.1};
  for (double w : girsanov_weight(zero, dB, 0.2)) EXPECT_EQ(w, 1.0);
  const auto M = girsanov_weight(std::vector<double>{0.3}, std::vector<double>{1.0}, 1.0);
  EXPECT_EQ(M[0], 1.0);
  EXPECT_NEAR(M[1], std::exp(0.3 * 1.0 - 0.5 * 0.09 * 1.0), 1e-15);
}

TEST(Girsanov, MartingaleMean) {
  const PathBundle b = gen_paths(100000, 16, 1.0, 42);
  for (double c : {0.5, -1.0, 0.2}) {
    std::vector<double> MT(b.num_paths);
    const std::vector<double> th(16, c);
    for (int j = 0; j < b.num_paths; ++j) MT[j] = girsanov_weight(th, b.increments(j), b.dt()).back();
    const Estimate e = sample_mean(MT);
    EXPECT_LT(std::abs(e.mean - 1.0), 3 * e.se) << "theta=" << c;
    for (double w : MT) ASSERT_GT(w, 0.0);
  }
}

TEST(FilterExact, ZeroStrategyKeepsThePrior) {
  const MarketModel m = three_uniform();
  const PathBundle b = gen_paths(50, 10, 1.0, 3);
  for (const FilterPaths& f : {filter_exact(m, constant_strategy({0, 0, 0}), b),
                               filter_sde(m, constant_strategy({0, 0, 0}), b)})
    for (int j = 0; j < b.num_paths; ++j)
      for (int k = 0; k <= b.num_steps; ++k) {
        for (int i = 0; i < 3; ++i) ASSERT_EQ(f.x(j, k)[i], m.prior[i]);
        ASSERT_EQ(f.price(j, k), price_of(m, m.prior));
      }
}

TEST(FilterExact, TanhInstance) {
  const MarketModel m = two_types();
  const PathBundle b = gen_paths(1000, 32, 1.0, 8);
  const FilterPaths f = filter_exact(m, constant_strategy({1, -1}), b);
  for (int j = 0; j < b.num_paths; ++j) {
    double B = 0;
    for (int k = 0; k <= b.num_steps; ++k) {
      ASSERT_NEAR(f.price(j, k), std::tanh(B), 1e-12);
      ASSERT_NEAR(f.x(j, k)[0], 1 / (1 + std::exp(-2 * B)), 1e-12);
      if (k < b.num_steps) B += b.increments(j)[k];
    }
  }
  PathBundle one = gen_paths(1, 1, 1.0, 0);
  one.dB[0] = 0.5;
  EXPECT_NEAR(filter_exact(m, constant_strategy({1, -1}), one).price(0, 1), 0.462117, 1e-6);
}

TEST(FilterExact, SingleType) {
  MarketModel m;
  m.num_types = 1;
  m.values = {0.7};
  m.prior = {1.0};
  const PathBundle b = gen_paths(10, 8, 1.0, 1);
  const FilterPaths f = filter_exact(m, constant_strategy({0.4}), b);
  for (int j = 0; j < 10; ++j)
    for (int k = 0; k <= 8; ++k) {
      ASSERT_EQ(f.x(j, k)[0], 1.0);
      ASSERT_EQ(f.price(j, k), 0.7);
    }
}

TEST(FilterSde, ThreeTypesStayOnTheSimplex) {
  const MarketModel m = three_uniform();
  const PathBundle b = gen_paths(2000, 64, 1.0, 17);
  const FilterPaths f = filter_sde(m, constant_strategy(m.values), b);
  for (int j = 0; j < b.num_paths; ++j)
    for (int k = 0; k <= b.num_steps; ++k) {
      const auto x = f.x(j, k);
      ASSERT_EQ(left_sum(x), 1.0);
      for (double c : x) {
        ASSERT_GT(c, 0.0);
        ASSERT_LT(c, 1.0);
      }
      ASSERT_GE(f.price(j, k), -1.0);
      ASSERT_LE(f.price(j, k), 1.0);
    }
}

TEST(FilterSde, ClippingIsCounted) {
  // Large rates on a coarse grid push the Euler step off the simplex.
  MarketModel m = two_types(4.0);
  const PathBundle b = gen_paths(200, 4, 4.0, 2);
  const FilterPaths f = filter_sde(m, constant_strategy({1, -1}), b);
  EXPECT_GT(f.clip_events, 0);
  for (int j = 0; j < b.num_paths; ++j)
    for (int k = 0; k <= b.num_steps; ++k) {
      ASSERT_EQ(left_sum(f.x(j, k)), 1.0);
      ASSERT_GE(f.x(j, k)[0], kSimplexClip);
      ASSERT_LE(f.x(j, k)[0], 1 - kSimplexClip);
    }
}

// Max-over-time RMS distance between the Euler filter and the ratio filter on
// the same Brownian paths shrinks with every halving of Δt.
TEST(FilterSde, ConvergesToTheExactFilter) {
  const MarketModel m = two_types();
  const StrategyFn s = constant_strategy({1, -1});
  const PathBundle fine = gen_paths(10000, 1024, 1.0, 42);
  double previous = 1e300;
  for (int factor : {32, 16, 8, 4, 2, 1}) {
    const PathBundle b = fine.coarsen(factor);
    const FilterPaths e = filter_exact(m, s, b), a = filter_sde(m, s, b);
    double worst = 0;
    for (int k = 1; k <= b.num_steps; ++k) {
      double ss = 0;
      for (int j = 0; j < b.num_paths; ++j) {
        const double d = a.x(j, k)[0] - e.x(j, k)[0];
        ss += d * d;
      }
      worst = std::max(worst, std::sqrt(ss / b.num_paths));
    }
    EXPECT_LT(worst, previous) << "steps=" << b.num_steps;
    previous = worst;
  }
}

TEST(FilterSde, ThreadCountIndependence) {
  const MarketModel m = three_uniform();
  const PathBundle b = gen_paths(500, 32, 1.0, 4);
  const StrategyFn s = [](int, double t, std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < 3; ++i) out[i] = std::sin(3 * x[i] + t) * 0.8;
  };
  for (auto run : {&filter_sde, &filter_exact}) {
    const FilterPaths a = run(m, s, b, 1), c = run(m, s, b, 4);
    EXPECT_EQ(a.X, c.X);
    EXPECT_EQ(a.P, c.P);
    EXPECT_EQ(a.logM, c.logM);
    EXPECT_EQ(a.clip_events, c.clip_events);
  }
}

TEST(FilterExact, WeightsMatchGirsanov) {
  const MarketModel m = two_types();
  const PathBundle b = gen_paths(20, 16, 1.0, 9);
  const FilterPaths f = filter_exact(m, constant_strategy({0.6, -0.2}), b);
  for (int j = 0; j < b.num_paths; ++j) {
    const auto M = girsanov_weight(std::vector<double>(16, 0.6), b.increments(j), b.dt());
    for (int k = 0; k <= 16; ++k) EXPECT_NEAR(std::exp(f.log_weight(j, k, 0)), M[k], 1e-12 * M[k]);
  }
}

TEST(CloseSimplex, ExactSum) {
  std::vector<double> x{0.1, 0.2, 0.3000000001, 0.4};
  close_simplex(x);
  EXPECT_EQ(left_sum(x), 1.0);
  std::vector<double> y{1.0 / 3, 1.0 / 3, 1.0 / 3};
  close_simplex(y);
  EXPECT_EQ(left_sum(y), 1.0);
}

TEST(CloseSimplex, RandomVectorsSumExactly) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n : {2, 3, 4, 7, 20})
    for (int t = 0; t < 100000; ++t) {
      std::vector<double> x(n);
      for (double& v : x) v = t % 3 ? u(g) : std::max(std::pow(u(g), 20), 1e-12);
      close_simplex(x);
      ASSERT_EQ(left_sum(x), 1.0);
      for (double v : x) {
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
      }
    }
}

TEST(PathsCsv, Columns) {
  const MarketModel m = two_types();
  const PathBundle b = gen_paths(3, 2, 1.0, 1);
  const FilterPaths f = filter_exact(m, constant_strategy({0.5, -0.5}), b);
  std::ostringstream os;
  write_paths_csv(os, b, f, 2);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "path,step,t,B,X_1,X_2,P,M_1,M_2");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 2 * 3);
}
