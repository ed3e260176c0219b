#pragma once

// Reference computations for the test suite. Nothing here links against the
// library: costs, Hamiltonians and filters are re-implemented from their
// definitions.

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

enum class Method { ClosedForm, GridSup, BinomialFixedPoint, Quadrature };

std::string to_string(Method m);

struct OracleResult {
  std::string name;
  std::map<std::string, double> inputs;
  std::map<std::string, std::vector<double>> values;
  Method method = Method::ClosedForm;

  double at(const std::string& key, std::size_t i = 0) const { return values.at(key).at(i); }
};

// Cost f on A = [-bound, bound] with its conjugate written out by hand.
struct Cost {
  std::function<double(double)> f;
  std::function<double(double)> H;
  std::function<double(double)> dH;
  double bound = 1.0;
};

Cost sqrt_cost();                            // f = -sqrt(1 - θ²), H = sqrt(1 + z²)
Cost quadratic_cost(double lambda, double bound);

// sup_{θ in [lo, hi]} (zθ - f(θ)) on 10^5 nodes, refined by golden section
// and a final parabolic step. values: "H", "argmax".
OracleResult oracle_hamiltonian(const std::function<double(double)>& f, double lo, double hi, double z);

struct TreeModel {
  std::vector<double> values, prior;
  double horizon = 1.0;
  int num_steps = 1;
};

// Non-recombining two-point tree with ΔQ = ±sqrt(Δt): the filter moves
// x -> x + σ(ΔQ - x̄Δt), σ_j = x_j(θ_j - x̄), the value is
// Y = ½(Y⁺ + Y⁻) + Δt H(v_i - P + Z_i) with Z_i = (Y⁺ - Y⁻)/(2 sqrt(Δt)),
// and θ_i = dH(v_i - P + Z_i) at every node. The whole finite system is
// iterated to a fixed point (sup change < tol, at most max_iter sweeps).
// values: "Y0", "Z0", "theta0", "X1_plus", "X1_minus", "P0", "iterations".
OracleResult oracle_onestep_equilibrium(const TreeModel& m, const Cost& cost, double tol = 1e-12,
                                        int max_iter = 10000);

// Mean and second moment of Q^v_t - v for the bridge Q^v_t = vt + (1-t)∫_0^t dB/(1-s),
// the isometry integral done by composite Simpson. values: "mean", "second_moment".
OracleResult oracle_bridge_moments(double v, double t);

// Constant price P and the zero strategy: the best response has
// Y_0 = T H(v_i - P) and the zero strategy earns -T f(0).
// values: "sup", "strategy", "epsilon1".
OracleResult oracle_constant_pair(const std::vector<double>& values, const std::vector<double>& prior,
                                  double horizon, double price, const Cost& cost);

}  // namespace oracle
