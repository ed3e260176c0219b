#include <cmath>

#include <gtest/gtest.h>

#include <kylelab/fbsde.hpp>
#include <kylelab/hamiltonian.hpp>
#include <kylelab/verify.hpp>

#include "frozen_constants.hpp"
#include "instances.hpp"

using namespace kylelab;

namespace {

EquilibriumSolution canonical_solution(int steps) {
  FbsdeOptions o;
  o.sample_paths = 0;
  return solve_fbsde(instances::canonical(), instances::disc(steps, 201), {}, o);
}

}  // namespace

TEST(Certify, ZeroPairClosedForm) {
  const MarketModel m = instances::canonical(1.0);
  const Hamiltonian H(m);
  const PathBundle b = gen_paths(20000, 32, 1.0, 42);
  const EpsilonCertificate c = certify(m, H, constant_pair(m, m.mean_value(), {0.0, 0.0}), b);
  EXPECT_EQ(c.epsilon2, 0.0);
  EXPECT_NEAR(c.epsilon1, frozen::kZeroPairEpsilon1T1, 3 * c.epsilon1_se + 1e-3);
  EXPECT_NEAR(c.epsilon1, 0.414214, 3 * c.epsilon1_se + 1e-3);
  EXPECT_GE(c.epsilon1, -3 * c.epsilon1_se);
  EXPECT_EQ(c.epsilon, std::max(c.epsilon1, c.epsilon2));
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(c.sup_values[i], std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(c.strategy_values[i], 1.0, 1e-9);
  }
  EXPECT_TRUE(c.verdicts.at("epsilon2_nonnegative"));
  EXPECT_TRUE(c.verdicts.at("epsilon1_nonnegative_within_noise"));

  const MarketModel q = instances::canonical(0.25);
  const PathBundle bq = gen_paths(20000, 16, 0.25, 42);
  EXPECT_NEAR(certify(q, Hamiltonian(q), constant_pair(q, 0.0, {0.0, 0.0}), bq).epsilon1,
              frozen::kZeroPairEpsilon1T025, 1e-6);
}

TEST(Certify, ConstantPairPriceMismatch) {
  // Everyone trades at rate 1 while the price stays at 0: the filter moves,
  // so the constant price is off by E ∫ |P^θ|² dt > 0.
  const MarketModel m = instances::canonical(0.25);
  const PathBundle b = gen_paths(20000, 16, 0.25, 1);
  const EpsilonCertificate c = certify(m, Hamiltonian(m), constant_pair(m, 0.0, {1.0, -1.0}), b);
  EXPECT_GT(c.epsilon2, 10 * c.epsilon2_se);
  EXPECT_GE(c.epsilon, c.epsilon2);
}

// One Brownian population on the finest grid, coarsened for the others.
TEST(Certify, EquilibriumEpsilonShrinksUnderRefinement) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const PathBundle fine = gen_paths(100000, 64, m.horizon, 42);
  std::vector<EpsilonCertificate> certs;
  for (int K : {16, 32, 64}) {
    const EquilibriumSolution sol = canonical_solution(K);
    certs.push_back(certify(m, H, equilibrium_pair(sol), fine.coarsen(64 / K)));
    EXPECT_GE(certs.back().epsilon2, 0.0);
  }
  EXPECT_GT(certs[0].epsilon, certs[1].epsilon);
  EXPECT_GT(certs[1].epsilon, certs[2].epsilon);

  // At the finest step ε₁ is non-negative within noise. At K = 16 the grid sup
  // value sits below the Monte Carlo strategy value by a discretization gap.
  EXPECT_GE(certs[2].epsilon1, -3 * certs[2].epsilon1_se);
  EXPECT_TRUE(certs[2].verdicts.at("epsilon1_nonnegative_within_noise"));
  EXPECT_LE(std::abs(certs[0].epsilon1), 3 * certs[0].epsilon1_se + 5e-5);
}

TEST(Certify, DegradedStrategyIsWorse) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const EquilibriumSolution sol = canonical_solution(32);
  const PathBundle b = gen_paths(20000, 32, m.horizon, 5);
  const CertifyInputs eq = equilibrium_pair(sol);
  CertifyInputs worse = eq;
  const StrategyFn base = eq.insider;
  worse.insider = [base](int k, double t, std::span<const double> x, std::span<double> out) {
    base(k, t, x, out);
    for (double& v : out) v = std::clamp(v + 0.2, -1.0, 1.0);
  };
  const EpsilonCertificate a = certify(m, H, eq, b), c = certify(m, H, worse, b);
  EXPECT_GT(c.epsilon1 - a.epsilon1, 3 * std::hypot(a.epsilon1_se, c.epsilon1_se));
  // The market's filter no longer matches the insider's rates.
  EXPECT_GT(c.epsilon2, a.epsilon2);
}

TEST(Certify, EnvelopeFeedbackClosesTheGap) {
  const MarketModel m = instances::canonical();
  const EquilibriumSolution sol = canonical_solution(64);
  const PathBundle b = gen_paths(20000, 64, m.horizon, 9);
  const EpsilonCertificate c = certify(m, Hamiltonian(m), equilibrium_pair(sol), b);
  for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(c.per_type_gaps[i]), 3 * c.gap_se[i] + 5e-5);
  EXPECT_NEAR(c.sup_values[0], sol.Y0[0], 1e-9);
}

TEST(SetValueProbe, Examples) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const EquilibriumSolution sol = canonical_solution(32);
  const PathBundle b = gen_paths(20000, 32, m.horizon, 42);
  const EpsilonCertificate c = certify(m, H, equilibrium_pair(sol), b);

  FbsdeOptions o;
  o.sample_paths = 0;
  const EquilibriumSolution rerun = solve_fbsde(m, instances::disc(32, 201, 10000, 7), {}, o);

  std::vector<double> shifted = c.strategy_values;
  for (double& y : shifted) y += 1.0;
  const double eps = c.epsilon;
  const auto rows = setvalue_probe(m, {c.strategy_values, shifted, rerun.Y0}, {c}, {eps, 2 * eps, 0.999});
  ASSERT_EQ(rows.size(), 9u);
  // Order: candidate-major, then level.
  EXPECT_TRUE(rows[0].member);
  EXPECT_EQ(rows[0].gap, 0.0);
  for (int l = 0; l < 3; ++l) {
    EXPECT_FALSE(rows[3 + l].member);
    EXPECT_NEAR(rows[3 + l].gap, 1.0, 1e-12);
  }
  EXPECT_TRUE(rows[7].member) << "gap " << rows[7].gap << " level " << rows[7].level;
}
