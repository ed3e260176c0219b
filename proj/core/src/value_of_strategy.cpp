#include <cmath>

#include "kylelab/bsde.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"

namespace kylelab {

Estimate value_of_strategy(const MarketModel& m, const Hamiltonian& H, int type, std::span<const double> price,
                           std::span<const double> theta, const PathBundle& b, int threads) {
  const int K = b.num_steps;
  const std::size_t n = static_cast<std::size_t>(b.num_paths);
  if (price.size() != n * (K + 1) || theta.size() != n * K)
    throw DomainError("value_of_strategy: price/theta shapes do not match the bundle");
  const double dt = b.dt();
  const double v = m.values[type];
  std::vector<double> sample(n);
  parallel_for(n, threads, [&](std::size_t j) {
    auto dB = b.increments(static_cast<int>(j));
    double L = 0, G = 0;
    for (int k = 0; k < K; ++k) {
      const double th = theta[j * K + k];
      G += ((v - price[j * (K + 1) + k]) * th - H.cost(th)) * dt;
      L += th * dB[k] - 0.5 * th * th * dt;
    }
    sample[j] = std::exp(L) * G;
  });
  return sample_mean(sample);
}

}  // namespace kylelab
