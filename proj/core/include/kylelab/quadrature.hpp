#pragma once

#include <vector>

namespace kylelab {

// Nodes and weights for E[g(V)], V ~ N(0, 1) (probabilists' Hermite rule);
// the weights sum to one.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Quadrature gauss_hermite(int n);

}  // namespace kylelab
