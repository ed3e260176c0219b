#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <kylelab/error.hpp>
#include <kylelab/hamiltonian.hpp>

#include "oracles.hpp"

using namespace kylelab;

namespace {

CostSpec sqrt_spec() { return {}; }

CostSpec quadratic_spec(double lambda) {
  CostSpec c;
  c.variant = CostVariant::Quadratic;
  c.lambda = lambda;
  return c;
}

CostSpec table_spec() {
  CostSpec c;
  c.variant = CostVariant::Tabulated;
  c.table_theta = {-1.0, -0.6, -0.25, 0.0, 0.25, 0.6, 1.0};
  for (double t : c.table_theta) c.table_cost.push_back(t * t * t * t / 4 + t * t / 2);
  return c;
}

}  // namespace

TEST(SqrtHamiltonian, PrintedValues) {
  const Hamiltonian H(sqrt_spec(), 1.0);
  EXPECT_EQ(H.H(0), 1.0);
  EXPECT_EQ(H.dH(0), 0.0);
  EXPECT_NEAR(H.H(1), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(H.dH(1), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(H.cost(0), -1.0);
  EXPECT_EQ(H.cost(1), 0.0);
  EXPECT_THROW(H.cost(1.5), DomainError);
}

TEST(QuadraticHamiltonian, Examples) {
  const Hamiltonian H(quadratic_spec(1.0), 1.0);
  EXPECT_NEAR(H.H(2), 1.5, 1e-15);
  EXPECT_EQ(H.dH(2), 1.0);
  EXPECT_NEAR(H.H(0.3), 0.045, 1e-15);
  EXPECT_EQ(H.cost(0.5), 0.125);
  const auto o = oracle::oracle_hamiltonian([](double t) { return 0.5 * t * t; }, -1, 1, 2.0);
  EXPECT_NEAR(H.H(2), o.at("H"), 1e-10);
  EXPECT_NEAR(H.dH(2), o.at("argmax"), 1e-10);
}

TEST(Hamiltonian, AgreesWithGridSupOracle) {
  const std::vector<std::pair<CostSpec, double>> cases{
      {sqrt_spec(), 1.0}, {quadratic_spec(1.0), 1.0}, {quadratic_spec(0.4), 2.0}, {table_spec(), 1.0}};
  for (const auto& [spec, a] : cases) {
    const Hamiltonian H(spec, a);
    for (double z = -6; z <= 6; z += 0.53) {
      const auto o = oracle::oracle_hamiltonian([&](double t) { return H.cost(t); }, -a, a, z);
      EXPECT_NEAR(H.H(z), o.at("H"), 1e-9) << to_string(spec.variant) << " z=" << z;
      EXPECT_NEAR(H.dH(z), o.at("argmax"), 1e-6) << to_string(spec.variant) << " z=" << z;
    }
  }
}

TEST(Hamiltonian, EnvelopeFiniteDifference) {
  const double h = 1e-4;
  for (const auto& [spec, a, tol] : std::vector<std::tuple<CostSpec, double, double>>{
           {sqrt_spec(), 1.0, 1e-6}, {quadratic_spec(1.0), 1.0, 1e-6}, {table_spec(), 1.0, 1e-3}}) {
    const Hamiltonian H(spec, a);
    for (int n = -1000; n <= 1000; ++n) {
      const double z = n * 0.01;
      const double fd = (H.H(z + h) - H.H(z - h)) / (2 * h);
      // The bounded quadratic saturates at |z| = λa, where dH has a corner and
      // the central difference is only first order.
      const bool corner = spec.variant == CostVariant::Quadratic && std::abs(std::abs(z) - spec.lambda * a) < 2 * h;
      EXPECT_NEAR(fd, H.dH(z), corner ? h * H.lipschitz() : tol) << to_string(spec.variant) << " z=" << z;
    }
  }
}

TEST(Hamiltonian, FenchelInequalityAndEquality) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> uz(-8, 8), ut(-1, 1);
  for (const CostSpec& spec : {sqrt_spec(), quadratic_spec(1.3), table_spec()}) {
    const Hamiltonian H(spec, 1.0);
    for (int n = 0; n < 1000; ++n) {
      const double z = uz(gen), th = ut(gen);
      EXPECT_GE(H.H(z) + 1e-12, z * th - H.cost(th));
      const double star = H.dH(z);
      EXPECT_NEAR(H.H(z), z * star - H.cost(star), 1e-9);
      EXPECT_LE(std::abs(star), H.bound());
    }
  }
}

TEST(Hamiltonian, LipschitzCertificate) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> uz(-10, 10);
  for (const CostSpec& spec : {sqrt_spec(), quadratic_spec(0.5), table_spec()}) {
    const Hamiltonian H(spec, 1.0);
    const double L = H.lipschitz();
    ASSERT_TRUE(std::isfinite(L));
    for (int n = 0; n < 1000; ++n) {
      const double a = uz(gen), b = uz(gen);
      EXPECT_LE(std::abs(H.dH(a) - H.dH(b)), L * std::abs(a - b) + 1e-12);
    }
  }
}

TEST(Hamiltonian, GrowthConstantBoundsTheCost) {
  for (const CostSpec& spec : {sqrt_spec(), quadratic_spec(2.0), table_spec()}) {
    const Hamiltonian H(spec, 1.0);
    const double C = H.growth_constant();
    ASSERT_TRUE(std::isfinite(C));
    for (double t = -1; t <= 1; t += 0.01) EXPECT_GE(H.cost(t), H.cost(0) - C * std::abs(t) - 1e-12);
  }
}

TEST(Hamiltonian, TabulatedNeedsThreePoints) {
  CostSpec c;
  c.variant = CostVariant::Tabulated;
  c.table_theta = {-1, 1};
  c.table_cost = {1, 1};
  EXPECT_THROW(Hamiltonian(c, 1.0), Error);
}

TEST(Hamiltonian, UnboundedQuadratic) {
  const Hamiltonian H(quadratic_spec(2.0), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(H.H(3), 9.0 / 4, 1e-15);
  EXPECT_NEAR(H.dH(3), 1.5, 1e-15);
}
