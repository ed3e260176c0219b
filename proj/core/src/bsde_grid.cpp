#include <algorithm>
#include <cmath>
#include <sstream>

#include "kylelab/bsde.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"

namespace kylelab {

PriceMap market_price(const MarketModel& m) {
  return [m](int, double, std::span<const double> x) { return price_of(m, x); };
}

PriceMap constant_price(double p) {
  return [p](int, double, std::span<const double>) { return p; };
}

double ValueSurface::u_at(int i, int k, std::span<const double> x) const {
  std::span<const double> slice(u.data() + slot(k, 0, 0), static_cast<std::size_t>(grid->num_nodes()) * num_types);
  return grid->interpolate(slice, num_types, i, x);
}

double ValueSurface::zeta_at(int i, int k, std::span<const double> x) const {
  std::span<const double> slice(zeta.data() + slot(k, 0, 0), static_cast<std::size_t>(grid->num_nodes()) * num_types);
  return grid->interpolate(slice, num_types, i, x);
}

FeedbackStrategy ValueSurface::feedback() const { return FeedbackStrategy(grid, num_steps, horizon, theta); }

double ValueSurface::distance(const ValueSurface& o) const {
  if (o.u.size() != u.size()) throw DomainError("ValueSurface::distance: shapes differ");
  double d = 0;
  for (std::size_t c = 0; c < u.size(); ++c) d = std::max({d, std::abs(u[c] - o.u[c]), std::abs(zeta[c] - o.zeta[c])});
  return d;
}

namespace {

std::string describe(double t, std::span<const double> x) {
  std::ostringstream os;
  os.precision(10);
  os << "t=" << t << ", x=(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

struct NodeWork {
  std::vector<double> xp, xm, a, b, z;
  explicit NodeWork(int N) : xp(N), xm(N), a(N), b(N), z(N) {}
};

}  // namespace

ValueSurface bsde_solve_grid(const MarketModel& m, const Hamiltonian& H, const PriceMap& price,
                             const GridSolveOptions& opt) {
  const int N = m.num_types;
  if (N > 3) throw DomainError("bsde_solve_grid: grid solver supports at most 3 types");
  if (opt.num_steps < 1) throw DomainError("bsde_solve_grid: num_steps must be positive");

  ValueSurface s;
  if (opt.dynamics && opt.dynamics->num_types() == N &&
      opt.dynamics->grid().interior_per_dim() == opt.interior_per_dim)
    s.grid = opt.dynamics->grid_ptr();
  else
    s.grid = std::make_shared<SimplexGrid>(N, opt.interior_per_dim);
  const SimplexGrid& g = *s.grid;
  const int nodes = g.num_nodes();
  const int K = opt.num_steps;
  s.num_types = N;
  s.num_steps = K;
  s.horizon = m.horizon;
  s.u.assign(static_cast<std::size_t>(K + 1) * nodes * N, 0.0);
  s.zeta.assign(s.u.size(), 0.0);
  s.theta.assign(static_cast<std::size_t>(K) * nodes * N, 0.0);

  const double dt = s.dt();
  const double sq = std::sqrt(dt);
  const bool node_aligned = opt.dynamics && opt.dynamics->grid_ptr() == s.grid && opt.dynamics->num_steps() == K;

  std::vector<long long> clips(nodes);
  std::vector<double> defect(nodes);
  std::vector<int> inner(nodes);

  for (int k = K - 1; k >= 0; --k) {
    const double t = m.horizon * k / K;
    const double t1 = m.horizon * (k + 1) / K;
    std::span<const double> next_u(s.u.data() + s.slot(k + 1, 0, 0), static_cast<std::size_t>(nodes) * N);
    std::span<const double> next_z(s.zeta.data() + s.slot(k + 1, 0, 0), static_cast<std::size_t>(nodes) * N);

    parallel_for(static_cast<std::size_t>(nodes), opt.threads, [&](std::size_t node) {
      auto x = g.node(static_cast<int>(node));
      const double P = price(k, t, x);
      NodeWork w(N);
      std::vector<double> th(N), th_new(N);
      long long clip_here = 0;
      double defect_here = 0;

      // Filter increment under rates th, then Z from the two-point difference.
      auto propagate = [&](std::span<const double> rate, bool record) {
        double xbar = 0;
        for (int j = 0; j < N; ++j) xbar += rate[j] * x[j];
        double sp = 0, sm = 0;
        for (int j = 0; j < N; ++j) {
          double sigma = x[j] * (rate[j] - xbar);
          double drift = -sigma * xbar * dt;
          w.xp[j] = x[j] + drift + sigma * sq;
          w.xm[j] = x[j] + drift - sigma * sq;
          sp += w.xp[j];
          sm += w.xm[j];
        }
        if (record) defect_here = std::max({defect_here, std::abs(sp - 1.0), std::abs(sm - 1.0)});
        for (auto* pt : {&w.xp, &w.xm}) {
          bool out = false;
          for (double& c : *pt)
            if (c < 0.0 || c > 1.0) {
              c = std::clamp(c, 0.0, 1.0);
              out = true;
            }
          if (out) {
            close_simplex(*pt);
            if (record) ++clip_here;
          }
        }
        auto sp_st = g.locate(w.xp);
        auto sm_st = g.locate(w.xm);
        for (int i = 0; i < N; ++i) {
          w.a[i] = SimplexGrid::apply(sp_st, next_u, N, i);
          w.b[i] = SimplexGrid::apply(sm_st, next_u, N, i);
          w.z[i] = (w.a[i] - w.b[i]) / (2.0 * sq);
        }
      };

      int iters = 0;
      if (opt.dynamics) {
        if (node_aligned)
          for (int j = 0; j < N; ++j) th[j] = opt.dynamics->at_node(k, static_cast<int>(node), j);
        else
          opt.dynamics->evaluate(t, x, th);
        propagate(th, true);
      } else {
        for (int j = 0; j < N; ++j)
          th[j] = (k + 1 < K) ? s.theta[s.slot(k + 1, static_cast<int>(node), j)] : H.dH(m.values[j] - P);
        bool done = false;
        for (iters = 1; iters <= opt.inner_max_iter; ++iters) {
          propagate(th, false);
          double diff = 0;
          for (int j = 0; j < N; ++j) {
            th_new[j] = H.dH(m.values[j] - P + w.z[j]);
            diff = std::max(diff, std::abs(th_new[j] - th[j]));
          }
          if (diff < opt.inner_tol) {
            th = th_new;
            done = true;
            break;
          }
          for (int j = 0; j < N; ++j) th[j] += opt.inner_damping * (th_new[j] - th[j]);
        }
        if (!done)
          throw InnerFixedPointError(t, std::vector<double>(x.begin(), x.end()),
                                     "inner fixed point did not converge within " +
                                         std::to_string(opt.inner_max_iter) + " iterations at " + describe(t, x));
        propagate(th, true);
      }

      for (int i = 0; i < N; ++i) {
        const double zhat = m.values[i] - P + w.z[i];
        const auto hv = H.eval(zhat);
        double driver = hv.H;
        if (opt.explicit_driver) {
          const double Pp = price(k + 1, t1, w.xp), Pm = price(k + 1, t1, w.xm);
          const double zp = g.interpolate(next_z, N, i, w.xp), zm = g.interpolate(next_z, N, i, w.xm);
          driver = 0.5 * (H.H(m.values[i] - Pp + zp) + H.H(m.values[i] - Pm + zm));
        }
        s.u[s.slot(k, static_cast<int>(node), i)] = 0.5 * (w.a[i] + w.b[i]) + dt * driver;
        s.zeta[s.slot(k, static_cast<int>(node), i)] = w.z[i];
        s.theta[(static_cast<std::size_t>(k) * nodes + node) * N + i] = hv.dH;
      }
      clips[node] += clip_here;
      defect[node] = std::max(defect[node], defect_here);
      inner[node] = std::max(inner[node], iters);
    });
  }
  for (int n = 0; n < nodes; ++n) {
    s.clip_events += clips[n];
    s.max_sum_defect = std::max(s.max_sum_defect, defect[n]);
    s.max_inner_iterations = std::max(s.max_inner_iterations, inner[n]);
  }
  return s;
}

}  // namespace kylelab
