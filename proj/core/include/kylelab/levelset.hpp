#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kylelab/feedback.hpp"
#include "kylelab/fbsde.hpp"
#include "kylelab/hamiltonian.hpp"
#include "kylelab/model.hpp"
#include "kylelab/simulate.hpp"
#include "kylelab/stats.hpp"

namespace kylelab {

// Feedback controls (θ, Z) for the forward system: both tabulated per type on
// time grid × simplex grid.
struct ControlPair {
  FeedbackStrategy theta;
  FeedbackStrategy z;
  std::string provenance;  // "zero", "equilibrium", "search", ...
};

ControlPair zero_controls(const MarketModel& m, int num_steps);
// θ* and ζ* of a solved equilibrium tabulated on its grid (N <= 3).
ControlPair equilibrium_controls(const EquilibriumSolution& sol);

struct LevelSetReport {
  std::vector<double> y;
  std::vector<Estimate> terminal;  // E|Y_T^i|²
  std::vector<Estimate> running;   // E∫|h^i|^{4/3} dt
  std::vector<Estimate> cost;      // 𝒥_i
  Estimate total;                  // Σ_i 𝒥_i
  std::string provenance;
  std::vector<double> Y_T;         // [j*N + i]

  nlohmann::json to_json() const;
};

// Forward simulation of the filter X under θ and of
// Y_t = y - ∫H(Ẑ) ds + ∫Z dB, Ẑ_i = v_i + Z_i - Σ v_j X_j, accumulating
// 𝒥_i = E[|Y_T^i|² + ∫|h^i|^{4/3} ds] with h^i = H(Ẑ^i) - Ẑ^i θ^i + f(θ^i).
LevelSetReport eval_cost(const MarketModel& m, const Hamiltonian& H, std::span<const double> y,
                         const ControlPair& controls, const PathBundle& bundle, int threads = 0);

struct SearchSpec {
  int time_blocks = 4;       // offsets are constant over a block of steps and over x
  double theta_step = 0.25;  // initial coordinate step, in units of the action bound when finite
  double z_step = 0.25;
  double shrink = 0.5;
  double min_step = 1e-3;
  int max_evaluations = 150;  // per restart
  int random_restarts = 1;
  std::uint64_t seed = 7;
  int threads = 0;
};

struct SearchResult {
  double value = 0;
  ControlPair best;
  std::vector<double> restart_values;
  std::vector<std::vector<double>> trace;  // accepted values per restart
  int evaluations = 0;
  bool budget_exhausted = false;
};

// Coordinate descent over block offsets added to the start tables, from each
// start and from random perturbations of the first one. An upper bound on W.
SearchResult search_W(const MarketModel& m, const Hamiltonian& H, std::span<const double> y,
                      const std::vector<ControlPair>& starts, const PathBundle& bundle,
                      const SearchSpec& spec = {});

struct MembershipRow {
  std::vector<double> y;
  double cost_at_equilibrium = 0, cost_at_equilibrium_se = 0;
  double best_search = 0;
  bool budget_exhausted = false;
  bool member = false;
};

struct MembershipMap {
  std::vector<double> Y0;
  double equilibrium_value = 0;  // Σ𝒥 at (Y0, equilibrium controls)
  double level_tol = 0;
  std::vector<MembershipRow> rows;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& os) const;
};

struct ProbeOptions {
  double level_tol = -1;  // <0: max(10 × equilibrium value, 1e-8)
  SearchSpec search;
  int num_paths = 1000;   // head of the solution bundle used for every evaluation; <=0 keeps all
};

MembershipMap duality_probe(const EquilibriumSolution& sol, const std::vector<std::vector<double>>& y_grid,
                            const ProbeOptions& opt = {});

}  // namespace kylelab
