#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kylelab/feedback.hpp"
#include "kylelab/hamiltonian.hpp"
#include "kylelab/model.hpp"
#include "kylelab/simplex_grid.hpp"
#include "kylelab/simulate.hpp"
#include "kylelab/stats.hpp"

namespace kylelab {

// Price as a feedback on (t, x); k is the time-step index of t.
using PriceMap = std::function<double(int k, double t, std::span<const double> x)>;

// P(t, x) = Σ v_i x_i.
PriceMap market_price(const MarketModel& m);
PriceMap constant_price(double p);

// Value and Z surfaces on time grid × simplex grid. Layout of u, zeta and theta
// is [(k*nodes + node)*N + i]; u and zeta have K+1 slices (zeta_K = 0), theta
// has K (the maximizing rate dH(v_i - P + ζ_i) used on step k).
struct ValueSurface {
  std::shared_ptr<const SimplexGrid> grid;
  int num_types = 0;
  int num_steps = 0;
  double horizon = 1.0;
  std::vector<double> u;
  std::vector<double> zeta;
  std::vector<double> theta;
  long long clip_events = 0;    // stencil points pushed back onto the simplex
  double max_sum_defect = 0.0;  // |Σ x± - 1| before projection
  int max_inner_iterations = 0;

  double dt() const { return horizon / num_steps; }
  std::size_t slot(int k, int node, int i) const {
    return (static_cast<std::size_t>(k) * grid->num_nodes() + node) * num_types + i;
  }
  double u_at(int i, int k, std::span<const double> x) const;
  double zeta_at(int i, int k, std::span<const double> x) const;
  // θ table as a FeedbackStrategy (optimal feedback for this surface).
  FeedbackStrategy feedback() const;
  // Sup-norm distance over u and zeta.
  double distance(const ValueSurface& other) const;
};

struct GridSolveOptions {
  int num_steps = 64;
  int interior_per_dim = 201;
  bool explicit_driver = false;
  int threads = 0;
  // Trading rates that drive the filter dynamics. Empty: the insider's own
  // maximizer dH(v_j - P + Z_j) at the same node, solved by damped iteration.
  const FeedbackStrategy* dynamics = nullptr;
  double inner_damping = 0.5;
  double inner_tol = 1e-10;
  int inner_max_iter = 200;
};

// Backward scheme for Y_t = ∫ H(v_i - P + Z) ds - ∫ Z dB on the simplex grid.
// Each step moves the node along the two-point filter increment
// x± = x + drift Δt ± σ √Δt, interpolates u_{k+1} there, reads Z from the
// difference quotient and adds the driver at the same step.
ValueSurface bsde_solve_grid(const MarketModel& m, const Hamiltonian& H, const PriceMap& price,
                             const GridSolveOptions& opt);

// Linear value of a per-path strategy θ' (one type) against per-path prices:
// E[M_T Σ ((v - P_k) θ'_k - f(θ'_k)) Δt]. price is [j*(K+1)+k], theta [j*K+k].
Estimate value_of_strategy(const MarketModel& m, const Hamiltonian& H, int type, std::span<const double> price,
                           std::span<const double> theta, const PathBundle& bundle, int threads = 0);

// Total-degree polynomial basis in the first N-1 simplex coordinates.
class PolyBasis {
 public:
  PolyBasis(int dim, int degree);
  int size() const { return static_cast<int>(powers_.size() / (dim_ ? dim_ : 1)); }
  int degree() const { return degree_; }
  void eval(std::span<const double> x, std::span<double> out) const;

 private:
  int dim_;
  int degree_;
  std::vector<int> powers_;  // size() rows of dim_ exponents
};

struct RegressionSurface {
  int num_types = 0;
  int num_steps = 0;
  double horizon = 1.0;
  // Per step k: regressors are standardized, s_c = (x_c - center) / scale.
  std::vector<std::vector<double>> center, scale;  // [k][c], c < N-1
  std::vector<int> degree;                         // [k]
  std::vector<std::vector<double>> coef_cont;      // [k*N + i], fit of Y_{k+1}
  std::vector<std::vector<double>> coef_z;         // [k*N + i], fit of Y_{k+1} ΔB_k / Δt
  std::vector<PolyBasis> basis;                    // [k]

  double continuation_at(int i, int k, std::span<const double> x) const;
  double z_at(int i, int k, std::span<const double> x) const;

 private:
  double apply(const std::vector<double>& coef, int k, std::span<const double> x) const;
};

struct RegressResult {
  RegressionSurface surface;
  std::vector<double> Y0, Y0_se, Z0;
  std::vector<double> cv_residual;  // per type, mean squared out-of-fold residual of the continuation fit
  std::vector<std::string> warnings;
  std::vector<double> Y;  // [(j*(K+1)+k)*N + i]
  std::vector<double> Z;  // [(j*K+k)*N + i]
};

// Least-squares Monte Carlo scheme on simulated filter paths: regressors are
// the filter states f.X, prices f.P.
RegressResult bsde_solve_regress(const MarketModel& m, const Hamiltonian& H, const FilterPaths& f,
                                 const PathBundle& bundle, int basis_degree, int threads = 0);

}  // namespace kylelab
