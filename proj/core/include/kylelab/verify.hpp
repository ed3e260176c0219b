#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kylelab/bsde.hpp"
#include "kylelab/fbsde.hpp"
#include "kylelab/hamiltonian.hpp"
#include "kylelab/model.hpp"
#include "kylelab/simulate.hpp"

namespace kylelab {

struct EpsilonCertificate {
  double epsilon1 = 0.0;  // Σ p_i (sup value - strategy value)
  double epsilon1_se = 0.0;
  double epsilon2 = 0.0;  // root of E ∫ |P - P^θ|² dt under the reference measure
  double epsilon2_se = 0.0;
  double epsilon = 0.0;   // max(ε₁⁺, ε₂)
  std::vector<double> per_type_gaps, gap_se;
  std::vector<double> sup_values;       // Y^{P,i}_0
  std::vector<double> strategy_values;  // J(P; v_i, θ^i), control-variate estimator
  std::vector<double> strategy_values_plain, strategy_values_plain_se;
  double dt = 0.0;
  int num_paths = 0;
  std::uint64_t seed = 0;
  std::map<std::string, bool> verdicts;
};

nlohmann::json to_json(const EpsilonCertificate& c);

// A candidate pair (P, θ). The market maker's filter runs on the rates
// `market` and prices with `price`; the insider of type i trades `insider`
// evaluated on the same public state.
struct CertifyInputs {
  StrategyFn market;
  PriceMap price;
  StrategyFn insider;
};

struct CertifyOptions {
  int grid_resolution = 201;  // simplex interior nodes for the sup solve (N <= 3)
  int basis_degree = 3;       // regression sup solve (N > 3)
  bool control_variate = true;
  int threads = 0;
};

EpsilonCertificate certify(const MarketModel& m, const Hamiltonian& H, const CertifyInputs& pair,
                           const PathBundle& bundle, const CertifyOptions& opt = {});

// The equilibrium pair of a solved FBSDE: market and insider both use θ*.
CertifyInputs equilibrium_pair(const EquilibriumSolution& sol);
// Constant rates for everyone and a constant price.
CertifyInputs constant_pair(const MarketModel& m, double price, std::vector<double> rates);

struct SetValueSample {
  std::vector<double> y;
  double pair_epsilon = 0.0;
  double gap = 0.0;  // Σ p_i |y_i - J_i|
  double level = 0.0;
  bool member = false;
};

std::vector<SetValueSample> setvalue_probe(const MarketModel& m, const std::vector<std::vector<double>>& candidates,
                                           const std::vector<EpsilonCertificate>& pairs,
                                           const std::vector<double>& levels);

struct MarkovTestReport {
  double coefficient = 0.0;  // on the auxiliary regressor
  double se = 0.0;           // heteroskedasticity-robust
  double z = 0.0;
  bool redundant = false;    // auxiliary lies in the span of the S-polynomial
  std::string verdict;       // "Markov-consistent", "non-Markov" or "inconclusive"
  int num_paths = 0;
  int degree = 1;
};

nlohmann::json to_json(const MarkovTestReport& r);

// Regresses S_{t+Δ} - S_t on (1, S_t, ..., S_t^degree, A_t).
MarkovTestReport markov_test(std::span<const double> s_t, std::span<const double> s_next,
                             std::span<const double> aux, int degree = 1, int min_paths = 100000);

// Paired samples (S_t, S_{t+Δ}, A_t) for markov_test.
struct MarkovSample {
  std::vector<double> s_t, s_next, aux;
};

// S_t = ∫_0^t B ds + B_t with A_t = ∫_0^t B ds, drawn exactly from the joint
// Gaussian law of (B, ∫B) at t and t + Δ.
MarkovSample markov_toy_sample(int num_paths, double t, double delta, std::uint64_t seed);
// S = B with an independent standard normal A.
MarkovSample markov_brownian_sample(int num_paths, double t, double delta, std::uint64_t seed);
// S = price, A = X¹ at steps k and k + lag of simulated filter paths.
MarkovSample markov_filter_sample(const FilterPaths& f, int k, int lag);

}  // namespace kylelab
