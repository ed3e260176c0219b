#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kylelab/stats.hpp"

// Back's Gaussian example on [0, 1] with V ~ N(0, 1): the bridge strategy,
// its truncation at level R, and Monte Carlo checks of the approximate
// equilibrium rate.
namespace kylelab {

// (v - q) / (1 - t); throws DomainError for t >= 1.
double bridge_strategy(double v, double t, double q);

// Closed-form insider value (v² + 1) / 2.
double bridge_value(double v);

// t_k = 1 - (1 - t_max)^{k/K}, so each step is proportional to 1 - t.
std::vector<double> geometric_grid(double t_max, int num_steps);
std::vector<double> uniform_grid(double t_max, int num_steps);

enum class BridgeIntegral {
  Exact,      // (ΔB, Δ∫dB/(1-s)) drawn from their joint Gaussian law
  LeftPoint,  // Σ ΔB_k / (1 - t_k)
};

// B_t and I_t = ∫_0^t dB_s/(1-s) at the grid times. Path j is a function of
// (seed, j) only.
struct BridgePaths {
  std::vector<double> times;
  int num_paths = 0;
  std::vector<double> B;  // [j*(K+1)+k]
  std::vector<double> I;

  int num_steps() const { return static_cast<int>(times.size()) - 1; }
  double b(int j, int k) const { return B[static_cast<std::size_t>(j) * times.size() + k]; }
  double integral(int j, int k) const { return I[static_cast<std::size_t>(j) * times.size() + k]; }
  // Q^v_t = v t + (1 - t) I_t and θ̂^v_t = v - I_t.
  double q(int j, int k, double v) const { return v * times[k] + (1 - times[k]) * integral(j, k); }
  double theta_hat(int j, int k, double v) const { return v - integral(j, k); }
};

// Generates one path at a time; the streaming estimators below use it to avoid
// storing whole populations.
class BridgeGenerator {
 public:
  BridgeGenerator(std::vector<double> times, std::uint64_t seed, BridgeIntegral mode = BridgeIntegral::Exact);
  // Fills B and I (both of size K+1) for path j.
  void path(std::uint64_t j, std::span<double> B, std::span<double> I) const;
  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
  std::vector<double> slope_, resid_sd_;  // ΔI = slope ΔB + resid_sd ξ
  std::uint64_t seed_;
  BridgeIntegral mode_;
};

BridgePaths simulate_bridge(const std::vector<double>& times, int num_paths, std::uint64_t seed,
                            BridgeIntegral mode = BridgeIntegral::Exact, int threads = 0);

// max_k |Q^v_k - ∫_0^{t_k} θ̂^v ds - B_k| on path j, trapezoid rule in time.
double bridge_ode_defect(const BridgePaths& paths, int j, double v);

struct BridgeValueCheck {
  double v = 0;
  double closed_form = 0;
  // ∫_0^τ (v - Q) θ̂ dt by trapezoid, plus the exact continuation of the
  // untruncated bridge from τ to 1.
  Estimate running;
  // E[v Q_1 - (Q_1² - 1)/2] under the truncated strategy (frozen after τ).
  Estimate terminal;
  double hit_fraction = 0;
};

struct BridgeRunOptions {
  int num_paths = 100000;
  std::uint64_t seed = 42;
  int steps_per_unit = 64;   // geometric steps per unit of log(1/(1-t))
  int tail_steps = 64;       // uniform steps on [1 - 1/R, 1] for the price mismatch
  int quadrature_nodes = 64;
  BridgeIntegral integral = BridgeIntegral::Exact;
  int threads = 0;
};

// τ_R = first grid time with |Q^v| >= R, capped at 1 - 1/R.
BridgeValueCheck bridge_value_check(double v, double R, const BridgeRunOptions& opt);

struct RateRow {
  double R = 0;
  double eps2 = 0, eps2_se = 0;            // sqrt of the direct estimate
  double eps2_sq = 0, eps2_sq_se = 0;      // E∫|B_t - B_{τ∧t}|² dt
  double eps2_identity = 0;                // sqrt of ½E(1-τ)²
  double eps2_identity_sq = 0, eps2_identity_sq_se = 0;
  bool estimators_agree = false;           // within 3 combined SE (squared scale)
  double eta = 0, eta_se = 0;
  double hit_fraction = 0;                 // P(τ_R < 1 - 1/R) under the reference measure
  int num_steps = 0;
  double epsilon() const { return eta > eps2 ? eta : eps2; }
};

struct RateReport {
  std::vector<RateRow> rows;
  double eps2_slope = 0;
  double eta_slope = 0;
  double eta_constant = 0;  // max_R η(R)·√R
  int num_paths = 0;
  std::uint64_t seed = 0;
  int quadrature_nodes = 0;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& os) const;
};

// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

RateReport truncation_rate(const std::vector<double>& R_list, const BridgeRunOptions& opt);

struct FixedPointRow {
  double t = 0;
  double fraction_below = 0;  // share of paths with defect < threshold
  double median = 0, p99 = 0, max = 0;
  std::vector<double> defects;
};

struct FixedPointOptions {
  double R = 16;
  int num_paths = 10000;
  std::uint64_t seed = 42;
  double dt = 1e-4;
  int quadrature_nodes = 64;
  double threshold = 1e-3;
  bool zero_strategy = false;  // control case θ ≡ 0
  int threads = 0;
};

// Relative defect |∫v M μ(dv) - B_{τ∧t} ∫M μ(dv)| / ∫|v| M μ(dv) per path.
std::vector<FixedPointRow> gaussian_fixed_point_check(const std::vector<double>& t_list,
                                                      const FixedPointOptions& opt);

}  // namespace kylelab
