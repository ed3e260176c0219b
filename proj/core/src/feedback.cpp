#include "kylelab/feedback.hpp"

#include <algorithm>
#include <cmath>

#include "kylelab/error.hpp"

namespace kylelab {

FeedbackStrategy::FeedbackStrategy(std::shared_ptr<const SimplexGrid> grid, int num_steps, double horizon,
                                   std::vector<double> values)
    : grid_(std::move(grid)), K_(num_steps), T_(horizon), values_(std::move(values)) {
  if (!grid_ || K_ < 1) throw DomainError("FeedbackStrategy: empty grid or time axis");
  if (values_.size() != static_cast<std::size_t>(K_) * grid_->num_nodes() * grid_->num_types())
    throw DomainError("FeedbackStrategy: table size does not match grid");
}

FeedbackStrategy FeedbackStrategy::constant(std::shared_ptr<const SimplexGrid> grid, int num_steps, double horizon,
                                            std::span<const double> theta) {
  const int N = grid->num_types();
  std::vector<double> v(static_cast<std::size_t>(num_steps) * grid->num_nodes() * N);
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = theta[c % N];
  return FeedbackStrategy(std::move(grid), num_steps, horizon, std::move(v));
}

int FeedbackStrategy::step_of(double t) const {
  int k = static_cast<int>(std::floor(t / T_ * K_ + 1e-9));
  return std::clamp(k, 0, K_ - 1);
}

void FeedbackStrategy::evaluate_step(int k, std::span<const double> x, std::span<double> out) const {
  const int N = grid_->num_types();
  auto st = grid_->locate(x);
  std::span<const double> slice(values_.data() + static_cast<std::size_t>(k) * grid_->num_nodes() * N,
                                static_cast<std::size_t>(grid_->num_nodes()) * N);
  for (int i = 0; i < N; ++i) out[i] = SimplexGrid::apply(st, slice, N, i);
}

double FeedbackStrategy::max_abs() const {
  double m = 0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

StrategyFn FeedbackStrategy::fn() const {
  auto self = std::make_shared<FeedbackStrategy>(*this);
  return [self](int, double t, std::span<const double> x, std::span<double> out) { self->evaluate(t, x, out); };
}

}  // namespace kylelab
