#include "kylelab/simplex_grid.hpp"

#include <algorithm>
#include <cmath>

#include "kylelab/error.hpp"

namespace kylelab {

SimplexGrid::SimplexGrid(int num_types, int interior_per_dim)
    : N_(num_types), n_(interior_per_dim), m_(interior_per_dim + 1), h_(1.0 / (interior_per_dim + 1)) {
  if (N_ < 1 || N_ > 3) throw DomainError("SimplexGrid supports 1 to 3 types");
  if (n_ < 1) throw DomainError("SimplexGrid needs at least one interior node per dimension");
  if (N_ == 1) {
    coords_ = {1.0};
    boundary_ = {1};
  } else if (N_ == 2) {
    for (int k = 0; k <= m_; ++k) {
      double x = static_cast<double>(k) / m_;
      coords_.push_back(x);
      coords_.push_back(static_cast<double>(m_ - k) / m_);
      boundary_.push_back(k == 0 || k == m_);
    }
  } else {
    for (int a = 0; a <= m_; ++a) {
      row_start_.push_back(num_nodes());
      for (int b = 0; a + b <= m_; ++b) {
        coords_.push_back(static_cast<double>(a) / m_);
        coords_.push_back(static_cast<double>(b) / m_);
        coords_.push_back(static_cast<double>(m_ - a - b) / m_);
        boundary_.push_back(a == 0 || b == 0 || a + b == m_);
      }
    }
  }
}

int SimplexGrid::index(int a, int b) const {
  if (N_ == 1) return 0;
  if (N_ == 2) return a;
  return row_start_[a] + b;
}

SimplexGrid::Stencil SimplexGrid::locate(std::span<const double> x) const {
  Stencil s;
  if (N_ == 1) {
    s.node[0] = 0;
    s.weight[0] = 1.0;
    s.count = 1;
    return s;
  }
  if (N_ == 2) {
    double u = std::clamp(x[0], 0.0, 1.0) * m_;
    int k = std::min(static_cast<int>(std::floor(u)), m_ - 1);
    double w = u - k;
    s.node = {k, k + 1, 0};
    s.weight = {1.0 - w, w, 0.0};
    s.count = 2;
    return s;
  }
  double u = std::clamp(x[0], 0.0, 1.0) * m_;
  double v = std::clamp(x[1], 0.0, 1.0) * m_;
  if (u + v > m_) {
    double sc = m_ / (u + v);
    u *= sc;
    v *= sc;
  }
  int a = std::min(static_cast<int>(std::floor(u)), m_ - 1);
  int b = std::min(static_cast<int>(std::floor(v)), m_ - 1 - a);
  double fa = u - a, fb = v - b;
  if (fa + fb <= 1.0 || a + b + 1 >= m_) {
    // Lower triangle (a,b), (a+1,b), (a,b+1). On the far edge a+b+1 = m the
    // upper triangle does not exist and fa + fb <= 1 up to rounding.
    double w0 = std::max(0.0, 1.0 - fa - fb);
    s.node = {index(a, b), index(a + 1, b), index(a, b + 1)};
    s.weight = {w0, fa, fb};
    double tot = w0 + fa + fb;
    for (double& w : s.weight) w /= tot;
  } else {
    s.node = {index(a + 1, b + 1), index(a + 1, b), index(a, b + 1)};
    s.weight = {fa + fb - 1.0, 1.0 - fb, 1.0 - fa};
  }
  s.count = 3;
  return s;
}

double SimplexGrid::interpolate(std::span<const double> values, int stride, int offset,
                                std::span<const double> x) const {
  return apply(locate(x), values, stride, offset);
}

}  // namespace kylelab
