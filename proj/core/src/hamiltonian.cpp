#include "kylelab/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kylelab/error.hpp"

namespace kylelab {

Hamiltonian::Hamiltonian(const CostSpec& spec, double action_bound)
    : variant_(spec.variant), a_(action_bound) {
  switch (variant_) {
    case CostVariant::SqrtClosedForm:
      a_ = 1.0;
      lipschitz_ = 1.0;
      growth_ = 0.0;
      break;
    case CostVariant::Quadratic:
      if (!(spec.lambda > 0)) throw ConfigError("model.cost.lambda", "must be positive");
      lambda_ = spec.lambda;
      lipschitz_ = 1.0 / lambda_;
      growth_ = 0.0;
      break;
    case CostVariant::Tabulated: {
      const auto& th = spec.table_theta;
      const auto& fv = spec.table_cost;
      if (th.size() < 3 || fv.size() != th.size())
        throw ConfigError("model.cost", "tabulated cost needs at least 3 (theta, cost) points");
      const std::size_t n = th.size();
      a_ = th.back();
      std::size_t zero = n;
      for (std::size_t k = 0; k < n; ++k)
        if (th[k] == 0.0) zero = k;
      if (zero == n) throw ConfigError("model.cost.theta", "table must contain theta = 0");

      cells_.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::size_t m = std::clamp<std::size_t>(k, 1, n - 2);
        double x0 = th[m - 1], x1 = th[m], x2 = th[m + 1];
        double y0 = fv[m - 1], y1 = fv[m], y2 = fv[m + 1];
        double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
        double curv = 2.0 * (d12 - d01) / (x2 - x0);
        // Parabola through the three nodes, written around the middle one.
        double d = d01 + 0.5 * curv * (x1 - x0);
        Cell& c = cells_[k];
        c.center = th[k];
        c.f0 = fv[k];
        c.slope = d + curv * (c.center - x1);
        c.curvature = curv;
        c.lo = (k == 0) ? th[0] : 0.5 * (th[k - 1] + th[k]);
        c.hi = (k + 1 == n) ? th[n - 1] : 0.5 * (th[k] + th[k + 1]);
      }
      lipschitz_ = 0.0;
      for (const Cell& c : cells_)
        lipschitz_ = c.curvature > 0 ? std::max(lipschitz_, 1.0 / c.curvature)
                                     : std::numeric_limits<double>::infinity();
      double f0 = fv[zero];
      growth_ = 0.0;
      for (const Cell& c : cells_)
        for (double t : {c.lo, c.center, c.hi})
          if (t != 0.0) growth_ = std::max(growth_, (f0 - cell_cost(c, t)) / std::abs(t));
      break;
    }
  }
  if (!(a_ > 0)) throw ConfigError("model.action_bound", "must be positive");
}

double Hamiltonian::cell_cost(const Cell& c, double theta) const {
  double d = theta - c.center;
  return c.f0 + c.slope * d + 0.5 * c.curvature * d * d;
}

double Hamiltonian::cost(double theta) const {
  if (!(std::abs(theta) <= a_)) throw DomainError("cost queried outside the action interval");
  switch (variant_) {
    case CostVariant::SqrtClosedForm:
      return -std::sqrt(1.0 - theta * theta);
    case CostVariant::Quadratic:
      return 0.5 * lambda_ * theta * theta;
    case CostVariant::Tabulated: {
      auto it = std::upper_bound(cells_.begin(), cells_.end(), theta,
                                 [](double t, const Cell& c) { return t < c.hi; });
      if (it == cells_.end()) --it;
      double v = cell_cost(*it, theta);
      // Shared cell endpoint: the lower of the two parabolas, so that H is
      // the conjugate of this f.
      if (it != cells_.begin() && theta == it->lo) v = std::min(v, cell_cost(*std::prev(it), theta));
      return v;
    }
  }
  return 0.0;
}

HamiltonianValue Hamiltonian::eval_tabulated(double z) const {
  HamiltonianValue best{-std::numeric_limits<double>::infinity(), 0.0};
  for (const Cell& c : cells_) {
    double cand[3] = {c.lo, c.hi, c.lo};
    int nc = 2;
    if (c.curvature > 0) {
      cand[2] = std::clamp(c.center + (z - c.slope) / c.curvature, c.lo, c.hi);
      nc = 3;
    }
    for (int j = 0; j < nc; ++j) {
      double v = z * cand[j] - cell_cost(c, cand[j]);
      if (v > best.H) best = {v, cand[j]};
    }
  }
  return best;
}

HamiltonianValue Hamiltonian::eval(double z) const {
  switch (variant_) {
    case CostVariant::SqrtClosedForm: {
      double r = std::sqrt(1.0 + z * z);
      return {r, z / r};
    }
    case CostVariant::Quadratic: {
      if (std::abs(z) <= lambda_ * a_) return {0.5 * z * z / lambda_, z / lambda_};
      double s = z > 0 ? 1.0 : -1.0;
      return {a_ * std::abs(z) - 0.5 * lambda_ * a_ * a_, s * a_};
    }
    case CostVariant::Tabulated:
      return eval_tabulated(z);
  }
  return {0.0, 0.0};
}

}  // namespace kylelab
