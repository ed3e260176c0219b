#pragma once

#include <array>
#include <span>
#include <vector>

namespace kylelab {

// Uniform grid on the closed simplex Δ_N for N ∈ {1, 2, 3}, spacing
// h = 1/(n+1) where n = interior nodes per dimension. Boundary nodes are kept:
// the filter dynamics vanish there, so they carry the degenerate solutions.
//   N = 1: the single point x = (1).
//   N = 2: x = (kh, 1 - kh), k = 0..n+1.
//   N = 3: x = (ah, bh, 1 - ah - bh), a, b >= 0, a + b <= n+1; piecewise
//          linear interpolation on the triangulation.
class SimplexGrid {
 public:
  struct Stencil {
    std::array<int, 3> node{};
    std::array<double, 3> weight{};
    int count = 0;
  };

  SimplexGrid(int num_types, int interior_per_dim);

  int num_types() const { return N_; }
  int interior_per_dim() const { return n_; }
  double spacing() const { return h_; }
  int num_nodes() const { return static_cast<int>(coords_.size() / N_); }
  std::span<const double> node(int idx) const {
    return {coords_.data() + static_cast<std::size_t>(idx) * N_, static_cast<std::size_t>(N_)};
  }
  bool on_boundary(int idx) const { return boundary_[idx] != 0; }

  // For N = 2 the index of (kh, 1-kh) is k; for N = 3 see index(a, b).
  int index(int a, int b = 0) const;

  Stencil locate(std::span<const double> x) const;

  // values laid out node-major with `stride` entries per node; returns the
  // interpolated component `offset`.
  double interpolate(std::span<const double> values, int stride, int offset, std::span<const double> x) const;
  static double apply(const Stencil& s, std::span<const double> values, int stride, int offset) {
    double v = 0;
    for (int c = 0; c < s.count; ++c) v += s.weight[c] * values[static_cast<std::size_t>(s.node[c]) * stride + offset];
    return v;
  }

 private:
  int N_;
  int n_;
  int m_;  // n + 1
  double h_;
  std::vector<double> coords_;
  std::vector<char> boundary_;
  std::vector<int> row_start_;  // N = 3: first index of row a
};

}  // namespace kylelab
