#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "kylelab/model.hpp"

namespace kylelab {

// Brownian increments ΔB under the reference measure, where the order flow Q
// is itself a Brownian motion. Row-major: path j occupies
// dB[j*num_steps, (j+1)*num_steps).
struct PathBundle {
  int num_paths = 0;
  int num_steps = 0;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::vector<double> dB;

  double dt() const { return horizon / num_steps; }
  double time(int k) const { return horizon * k / num_steps; }
  std::span<const double> increments(int path) const {
    return {dB.data() + static_cast<std::size_t>(path) * num_steps, static_cast<std::size_t>(num_steps)};
  }
  // Same Brownian paths on a grid `factor` times coarser.
  PathBundle coarsen(int factor) const;
  // First n paths.
  PathBundle head(int n) const;
};

PathBundle gen_paths(int num_paths, int num_steps, double horizon, std::uint64_t seed,
                     std::uint32_t stream = 0, int threads = 0);

// θ for all N types at step k, given the time and the current filter state.
using StrategyFn = std::function<void(int k, double t, std::span<const double> x, std::span<double> theta)>;

StrategyFn constant_strategy(std::vector<double> theta);

// M_k = exp(Σ_{l<k} θ_l ΔB_l - ½ Σ_{l<k} θ_l² Δt), k = 0..K.
std::vector<double> girsanov_weight(std::span<const double> theta, std::span<const double> dB, double dt);

struct FilterPaths {
  int num_paths = 0;
  int num_steps = 0;
  int num_types = 0;
  std::vector<double> X;      // [(j*(K+1)+k)*N + i]
  std::vector<double> P;      // [j*(K+1)+k]
  std::vector<double> logM;   // [(j*(K+1)+k)*N + i], log Girsanov weight of type i's strategy
  std::vector<double> theta;  // [(j*K+k)*N + i], strategy used on step k
  long long clip_events = 0;
  double max_sum_defect = 0.0;  // |Σ X - 1| after an Euler step, before projection

  std::span<const double> x(int j, int k) const {
    return {X.data() + (static_cast<std::size_t>(j) * (num_steps + 1) + k) * num_types,
            static_cast<std::size_t>(num_types)};
  }
  double price(int j, int k) const { return P[static_cast<std::size_t>(j) * (num_steps + 1) + k]; }
  double log_weight(int j, int k, int i) const {
    return logM[(static_cast<std::size_t>(j) * (num_steps + 1) + k) * num_types + i];
  }
  double theta_at(int j, int k, int i) const {
    return theta[(static_cast<std::size_t>(j) * num_steps + k) * num_types + i];
  }
};

// Ratio-of-weights filter evaluated pathwise; the strategy sees the
// exact-formula state.
FilterPaths filter_exact(const MarketModel& m, const StrategyFn& strategy, const PathBundle& bundle,
                         int threads = 0);

// Same ratio-of-weights filter for per-path, per-type rates fixed in advance;
// theta is laid out as FilterPaths::theta.
FilterPaths filter_exact_open_loop(const MarketModel& m, std::span<const double> theta, const PathBundle& bundle,
                                   int threads = 0);

// Euler scheme for the filter SDE followed by clip-and-renormalize onto the
// simplex; the strategy sees the scheme's own state.
FilterPaths filter_sde(const MarketModel& m, const StrategyFn& strategy, const PathBundle& bundle,
                       int threads = 0);

constexpr double kSimplexClip = 1e-12;

// Rescale so the left-to-right floating-point sum is exactly one; residual
// rounding goes into the largest component.
void close_simplex(std::span<double> x);

double price_of(const MarketModel& m, std::span<const double> x);

// CSV columns: path, step, t, B, X_1..X_N, P, M_1..M_N.
void write_paths_csv(std::ostream& os, const PathBundle& bundle, const FilterPaths& f, int max_paths);

}  // namespace kylelab
