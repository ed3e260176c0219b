#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kylelab/bsde.hpp"
#include "kylelab/feedback.hpp"
#include "kylelab/hamiltonian.hpp"
#include "kylelab/model.hpp"
#include "kylelab/simulate.hpp"

namespace kylelab {

enum class SolverKind { Grid, Regress };
std::string to_string(SolverKind s);

struct PicardLog {
  std::vector<double> deltas;  // sup-norm change of (u, ζ) per iteration
  bool converged = false;
};

struct FbsdeOptions {
  SolverKind solver = SolverKind::Grid;
  int threads = 0;
  // Equilibrium sample paths simulated after convergence; <0 means disc.num_paths.
  int sample_paths = -1;
};

struct EquilibriumSolution {
  MarketModel model;
  Discretization disc;
  SolverSettings settings;
  SolverKind solver = SolverKind::Grid;
  std::shared_ptr<const Hamiltonian> hamiltonian;

  std::optional<ValueSurface> surface;      // grid solver
  std::optional<RegressResult> regression;  // regression solver
  std::vector<double> Y0, Y0_se;
  PicardLog log;
  std::vector<std::string> warnings;

  // Forward pass under θ* from X_0 = p.
  PathBundle bundle;
  FilterPaths paths;
  std::vector<double> Y;  // [(j*(K+1)+k)*N + i]
  std::vector<double> Z;  // [(j*K+k)*N + i]
  long long final_clip_events = 0;
  double max_sum_defect = 0.0;

  double dt() const { return model.horizon / disc.num_steps; }
  double zeta(int i, int k, std::span<const double> x) const;
  double value(int i, int k, std::span<const double> x) const;
  // θ*_i = dH(v_i + ζ_i - Σ v_j x_j).
  void theta_star(int k, std::span<const double> x, std::span<double> out) const;
  StrategyFn strategy_fn() const;
};

// Picard iteration on the truncated equilibrium system: the rates of the
// previous iterate drive the filter, the backward equation is solved against
// P* = Σ v_i x_i, and the rates are replaced by dH(Ẑ). Throws
// PicardNonConvergence carrying the delta log when the cap is reached.
EquilibriumSolution solve_fbsde(const MarketModel& m, const Discretization& disc, const SolverSettings& settings,
                                const FbsdeOptions& opt = {});

struct ContractionReport {
  std::vector<double> ratios;  // δ_{n+1} / δ_n
  bool monotone = false;
  bool geometric = false;      // every ratio after the first below 1
  bool diverging = false;
  double tail_ratio = 0.0;     // geometric mean of the last few ratios
  std::string verdict;         // "geometric-decay", "stagnation" or "divergence"
};

ContractionReport picard_diagnostics(const PicardLog& log);

struct HorizonProbe {
  double horizon;
  bool converged;
  int iterations;
  double last_delta;
};

// Solve over a list of horizons; reports which converge. The largest
// convergent horizon is an empirical stand-in for the small-time threshold.
std::vector<HorizonProbe> horizon_sweep(const MarketModel& m, const Discretization& disc,
                                        const SolverSettings& settings, const std::vector<double>& horizons,
                                        const FbsdeOptions& opt = {});

// θ* tabulated on the solution's time grid × simplex grid (N <= 3).
FeedbackStrategy extract_strategy(const EquilibriumSolution& sol);

}  // namespace kylelab
