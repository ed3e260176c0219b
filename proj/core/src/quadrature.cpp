#include "kylelab/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "kylelab/error.hpp"

namespace kylelab {

// Golub-Welsch: eigen-decomposition of the Jacobi matrix of the monic
// probabilists' Hermite recurrence, off-diagonal entries sqrt(k).
Quadrature gauss_hermite(int n) {
  if (n < 1) throw DomainError("gauss_hermite: need at least one node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  double total = 0;
  for (int k = 0; k < n; ++k) {
    q.nodes[k] = es.eigenvalues()(k);
    double c = es.eigenvectors()(0, k);
    q.weights[k] = c * c;
    total += q.weights[k];
  }
  for (double& w : q.weights) w /= total;
  // Symmetrize: the rule is exact for odd moments only if nodes pair up.
  for (int k = 0; k < n / 2; ++k) {
    double a = 0.5 * (q.nodes[n - 1 - k] - q.nodes[k]);
    double w = 0.5 * (q.weights[k] + q.weights[n - 1 - k]);
    q.nodes[k] = -a;
    q.nodes[n - 1 - k] = a;
    q.weights[k] = q.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;
  return q;
}

}  // namespace kylelab
