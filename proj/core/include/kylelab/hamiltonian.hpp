#pragma once

#include <vector>

#include "kylelab/model.hpp"

namespace kylelab {

struct HamiltonianValue {
  double H;
  double dH;  // maximizing θ, equal to ∂H/∂z
};

// H(z) = sup_{θ∈[-a,a]} [zθ - f(θ)] for the three supported cost variants.
//
// The tabulated variant replaces f on each cell around a table node by the
// parabola through that node and its two neighbours; cells meet at the
// midpoints between nodes. That piecewise quadratic is what cost() returns,
// and H/dH are its exact conjugate, so the Fenchel relations hold exactly.
class Hamiltonian {
 public:
  explicit Hamiltonian(const MarketModel& m) : Hamiltonian(m.cost, m.action_bound) {}
  Hamiltonian(const CostSpec& spec, double action_bound);

  HamiltonianValue eval(double z) const;
  double H(double z) const { return eval(z).H; }
  double dH(double z) const { return eval(z).dH; }

  // f(θ); throws DomainError outside [-a, a].
  double cost(double theta) const;

  double bound() const { return a_; }
  // Lipschitz constant of dH.
  double lipschitz() const { return lipschitz_; }
  // Smallest C with f(θ) >= f(0) - C|θ| on the action interval.
  double growth_constant() const { return growth_; }
  CostVariant variant() const { return variant_; }

 private:
  struct Cell {
    double lo, hi;       // cell extent in θ
    double center;       // table node
    double f0, slope, curvature;  // q(θ) = f0 + slope (θ-c) + curvature/2 (θ-c)²
  };
  double cell_cost(const Cell& c, double theta) const;
  HamiltonianValue eval_tabulated(double z) const;

  CostVariant variant_;
  double a_;
  double lambda_ = 1.0;
  double lipschitz_ = 1.0;
  double growth_ = 0.0;
  std::vector<Cell> cells_;
};

}  // namespace kylelab
