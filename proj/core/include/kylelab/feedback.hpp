#pragma once

#include <memory>
#include <span>
#include <vector>

#include "kylelab/simplex_grid.hpp"
#include "kylelab/simulate.hpp"

namespace kylelab {

// Tabulated per-type trading rate θ_i(t_k, x): piecewise constant in time
// (θ at step k applies on [t_k, t_{k+1})) and piecewise linear in x over a
// SimplexGrid.
class FeedbackStrategy {
 public:
  FeedbackStrategy() = default;
  FeedbackStrategy(std::shared_ptr<const SimplexGrid> grid, int num_steps, double horizon, std::vector<double> values);

  // Same θ at every node and step.
  static FeedbackStrategy constant(std::shared_ptr<const SimplexGrid> grid, int num_steps, double horizon,
                                   std::span<const double> theta);

  int num_types() const { return grid_ ? grid_->num_types() : 0; }
  int num_steps() const { return K_; }
  double horizon() const { return T_; }
  const SimplexGrid& grid() const { return *grid_; }
  std::shared_ptr<const SimplexGrid> grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  int step_of(double t) const;
  double at_node(int k, int node, int i) const {
    return values_[(static_cast<std::size_t>(k) * grid_->num_nodes() + node) * grid_->num_types() + i];
  }
  void evaluate_step(int k, std::span<const double> x, std::span<double> out) const;
  void evaluate(double t, std::span<const double> x, std::span<double> out) const {
    evaluate_step(step_of(t), x, out);
  }
  double max_abs() const;

  // Adapter for the filters; looks the step up by time so it also serves
  // bundles on a finer grid.
  StrategyFn fn() const;

 private:
  std::shared_ptr<const SimplexGrid> grid_;
  int K_ = 0;
  double T_ = 1.0;
  std::vector<double> values_;  // [(k*nodes + node)*N + i]
};

}  // namespace kylelab
