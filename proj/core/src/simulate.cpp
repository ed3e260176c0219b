#include "kylelab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "kylelab/csv.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"
#include "kylelab/rng.hpp"

namespace kylelab {

PathBundle gen_paths(int num_paths, int num_steps, double horizon, std::uint64_t seed, std::uint32_t stream,
                     int threads) {
  if (num_paths < 1 || num_steps < 1 || !(horizon > 0)) throw DomainError("gen_paths: invalid discretization");
  PathBundle b;
  b.num_paths = num_paths;
  b.num_steps = num_steps;
  b.horizon = horizon;
  b.seed = seed;
  b.stream = stream;
  b.dB.resize(static_cast<std::size_t>(num_paths) * num_steps);
  const double sq = std::sqrt(b.dt());
  parallel_for(static_cast<std::size_t>(num_paths), threads, [&](std::size_t j) {
    Substream rng(seed, stream, j);
    double* out = b.dB.data() + j * num_steps;
    for (int k = 0; k < num_steps; ++k) out[k] = sq * rng.normal();
  });
  return b;
}

PathBundle PathBundle::coarsen(int factor) const {
  if (factor < 1 || num_steps % factor != 0) throw DomainError("coarsen: factor must divide num_steps");
  PathBundle c = *this;
  c.num_steps = num_steps / factor;
  c.dB.assign(static_cast<std::size_t>(num_paths) * c.num_steps, 0.0);
  for (int j = 0; j < num_paths; ++j) {
    auto fine = increments(j);
    for (int k = 0; k < c.num_steps; ++k) {
      double s = 0;
      for (int l = 0; l < factor; ++l) s += fine[k * factor + l];
      c.dB[static_cast<std::size_t>(j) * c.num_steps + k] = s;
    }
  }
  return c;
}

PathBundle PathBundle::head(int n) const {
  if (n < 1 || n > num_paths) throw DomainError("head: path count out of range");
  PathBundle c = *this;
  c.num_paths = n;
  c.dB.resize(static_cast<std::size_t>(n) * num_steps);
  return c;
}

StrategyFn constant_strategy(std::vector<double> theta) {
  return [theta = std::move(theta)](int, double, std::span<const double>, std::span<double> out) {
    std::copy(theta.begin(), theta.end(), out.begin());
  };
}

std::vector<double> girsanov_weight(std::span<const double> theta, std::span<const double> dB, double dt) {
  if (theta.size() != dB.size()) throw DomainError("girsanov_weight: theta and dB lengths differ");
  std::vector<double> M(dB.size() + 1);
  double L = 0;
  M[0] = 1.0;
  for (std::size_t k = 0; k < dB.size(); ++k) {
    L += theta[k] * dB[k] - 0.5 * theta[k] * theta[k] * dt;
    M[k + 1] = std::exp(L);
  }
  return M;
}

void close_simplex(std::span<double> x) {
  const std::size_t n = x.size();
  if (n == 1) {
    x[0] = 1.0;
    return;
  }
  double s = 0;
  for (double v : x) s += v;
  for (double& v : x) v /= s;
  std::size_t big = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
  for (int pass = 0; pass < 4; ++pass) {
    s = 0;
    for (double v : x) s += v;
    if (s == 1.0) return;
    x[big] += 1.0 - s;
  }
  // Still one rounding step off: put every other component on the 2^-53
  // grid, where all partial sums are exact, and let the largest absorb the rest.
  const double q = std::ldexp(1.0, -53);
  double rest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == big) continue;
    x[i] = std::max(q, std::nearbyint(x[i] / q) * q);
    rest += x[i];
  }
  x[big] = 1.0 - rest;
}

double price_of(const MarketModel& m, std::span<const double> x) {
  double p = 0;
  for (int i = 0; i < m.num_types; ++i) p += m.values[i] * x[i];
  return std::clamp(p, m.min_value(), m.max_value());
}

namespace {

FilterPaths allocate(const MarketModel& m, const PathBundle& b) {
  FilterPaths f;
  f.num_paths = b.num_paths;
  f.num_steps = b.num_steps;
  f.num_types = m.num_types;
  const std::size_t nodes = static_cast<std::size_t>(b.num_paths) * (b.num_steps + 1);
  f.X.resize(nodes * m.num_types);
  f.P.resize(nodes);
  f.logM.resize(nodes * m.num_types);
  f.theta.resize(static_cast<std::size_t>(b.num_paths) * b.num_steps * m.num_types);
  return f;
}

}  // namespace

namespace {

// rate(j, k, t, x, out) supplies the rates used on step k of path j.
template <class Rate>
FilterPaths exact_filter(const MarketModel& m, Rate&& rate, const PathBundle& b, int threads) {
  FilterPaths f = allocate(m, b);
  const int N = m.num_types, K = b.num_steps;
  const double dt = b.dt();
  std::vector<int> underflow(b.num_paths, 0);
  parallel_for(static_cast<std::size_t>(b.num_paths), threads, [&](std::size_t j) {
    std::vector<double> L(N, 0.0), th(N), w(N);
    auto dB = b.increments(static_cast<int>(j));
    for (int k = 0; k <= K; ++k) {
      const std::size_t node = j * (K + 1) + k;
      double* x = f.X.data() + node * N;
      double lmax = *std::max_element(L.begin(), L.end());
      if (!std::isfinite(lmax)) {
        underflow[j] = 1;
        return;
      }
      double s = 0;
      for (int i = 0; i < N; ++i) {
        w[i] = m.prior[i] * std::exp(L[i] - lmax);
        s += w[i];
      }
      for (int i = 0; i < N; ++i) x[i] = w[i] / s;
      // Identical log-weights reproduce the prior exactly; otherwise close the sum.
      bool all_equal = std::all_of(L.begin(), L.end(), [&](double v) { return v == L[0]; });
      if (all_equal) std::copy(m.prior.begin(), m.prior.end(), x);
      else close_simplex({x, static_cast<std::size_t>(N)});
      std::copy(L.begin(), L.end(), f.logM.begin() + node * N);
      f.P[node] = price_of(m, {x, static_cast<std::size_t>(N)});
      if (k == K) break;
      rate(j, k, b.time(k), std::span<const double>(x, N), std::span<double>(th));
      std::copy(th.begin(), th.end(), f.theta.begin() + (j * K + k) * N);
      for (int i = 0; i < N; ++i) L[i] += th[i] * dB[k] - 0.5 * th[i] * th[i] * dt;
    }
  });
  if (std::any_of(underflow.begin(), underflow.end(), [](int u) { return u; }))
    throw Error("filter_exact: all log-weights underflowed on some path");
  return f;
}

}  // namespace

FilterPaths filter_exact(const MarketModel& m, const StrategyFn& strategy, const PathBundle& b, int threads) {
  return exact_filter(
      m, [&](std::size_t, int k, double t, std::span<const double> x, std::span<double> out) { strategy(k, t, x, out); },
      b, threads);
}

FilterPaths filter_exact_open_loop(const MarketModel& m, std::span<const double> theta, const PathBundle& b,
                                   int threads) {
  const int N = m.num_types, K = b.num_steps;
  if (theta.size() != static_cast<std::size_t>(b.num_paths) * K * N)
    throw DomainError("filter_exact_open_loop: theta shape does not match the bundle");
  return exact_filter(
      m,
      [&](std::size_t j, int k, double, std::span<const double>, std::span<double> out) {
        for (int i = 0; i < N; ++i) out[i] = theta[(j * K + k) * N + i];
      },
      b, threads);
}

FilterPaths filter_sde(const MarketModel& m, const StrategyFn& strategy, const PathBundle& b, int threads) {
  FilterPaths f = allocate(m, b);
  const int N = m.num_types, K = b.num_steps;
  const double dt = b.dt();
  std::vector<long long> clips(b.num_paths, 0);
  std::vector<double> defect(b.num_paths, 0.0);
  parallel_for(static_cast<std::size_t>(b.num_paths), threads, [&](std::size_t j) {
    std::vector<double> L(N, 0.0), th(N), xn(N);
    auto dB = b.increments(static_cast<int>(j));
    double* x0 = f.X.data() + j * (K + 1) * N;
    std::copy(m.prior.begin(), m.prior.end(), x0);
    for (int k = 0; k <= K; ++k) {
      const std::size_t node = j * (K + 1) + k;
      double* x = f.X.data() + node * N;
      std::copy(L.begin(), L.end(), f.logM.begin() + node * N);
      f.P[node] = price_of(m, {x, static_cast<std::size_t>(N)});
      if (k == K) break;
      strategy(k, b.time(k), {x, static_cast<std::size_t>(N)}, th);
      std::copy(th.begin(), th.end(), f.theta.begin() + (j * K + k) * N);
      double xbar = 0;
      for (int i = 0; i < N; ++i) xbar += th[i] * std::clamp(x[i], 0.0, 1.0);
      double s = 0;
      for (int i = 0; i < N; ++i) {
        xn[i] = x[i] + std::clamp(x[i], 0.0, 1.0) * (th[i] - xbar) * (dB[k] - xbar * dt);
        s += xn[i];
        L[i] += th[i] * dB[k] - 0.5 * th[i] * th[i] * dt;
      }
      defect[j] = std::max(defect[j], std::abs(s - 1.0));
      double* next = x + N;
      if (N == 1) {
        next[0] = 1.0;
        continue;
      }
      for (int i = 0; i < N; ++i) {
        if (xn[i] < kSimplexClip) {
          xn[i] = kSimplexClip;
          ++clips[j];
        } else if (xn[i] > 1.0 - kSimplexClip) {
          xn[i] = 1.0 - kSimplexClip;
          ++clips[j];
        }
      }
      std::copy(xn.begin(), xn.end(), next);
      close_simplex({next, static_cast<std::size_t>(N)});
    }
  });
  for (int j = 0; j < b.num_paths; ++j) {
    f.clip_events += clips[j];
    f.max_sum_defect = std::max(f.max_sum_defect, defect[j]);
  }
  return f;
}

void write_paths_csv(std::ostream& os, const PathBundle& b, const FilterPaths& f, int max_paths) {
  CsvWriter w(os);
  std::vector<std::string> cols{"path", "step", "t", "B"};
  for (int i = 0; i < f.num_types; ++i) cols.push_back("X_" + std::to_string(i + 1));
  cols.push_back("P");
  for (int i = 0; i < f.num_types; ++i) cols.push_back("M_" + std::to_string(i + 1));
  w.header(cols);
  const int n = std::min(max_paths, f.num_paths);
  for (int j = 0; j < n; ++j) {
    double B = 0;
    auto dB = b.increments(j);
    for (int k = 0; k <= f.num_steps; ++k) {
      w << j << k << b.time(k) << B;
      w.values(f.x(j, k));
      w << f.price(j, k);
      for (int i = 0; i < f.num_types; ++i) w << std::exp(f.log_weight(j, k, i));
      w.end_row();
      if (k < f.num_steps) B += dB[k];
    }
  }
}

}  // namespace kylelab
