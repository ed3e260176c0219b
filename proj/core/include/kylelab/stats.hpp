#pragma once

#include <cmath>
#include <span>

namespace kylelab {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

// Sample mean with its standard error; sequential two-pass sums.
inline Estimate sample_mean(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (x.empty()) return {};
  double s = 0;
  for (double v : x) s += v;
  const double mean = s / n;
  double s2 = 0;
  for (double v : x) s2 += (v - mean) * (v - mean);
  return {mean, x.size() > 1 ? std::sqrt(s2 / (n - 1) / n) : 0.0};
}

}  // namespace kylelab
