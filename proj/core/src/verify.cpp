#include "kylelab/verify.hpp"

#include <algorithm>
#include <cmath>

#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"
#include "kylelab/stats.hpp"

namespace kylelab {

using nlohmann::json;

json to_json(const EpsilonCertificate& c) {
  json v = json::object();
  for (const auto& [k, b] : c.verdicts) v[k] = b;
  return json{{"epsilon1", c.epsilon1},
              {"epsilon1_se", c.epsilon1_se},
              {"epsilon2", c.epsilon2},
              {"epsilon2_se", c.epsilon2_se},
              {"epsilon", c.epsilon},
              {"per_type_gaps", c.per_type_gaps},
              {"gap_se", c.gap_se},
              {"sup_values", c.sup_values},
              {"strategy_values", c.strategy_values},
              {"strategy_values_plain", c.strategy_values_plain},
              {"strategy_values_plain_se", c.strategy_values_plain_se},
              {"dt", c.dt},
              {"num_paths", c.num_paths},
              {"seed", c.seed},
              {"verdicts", v}};
}

CertifyInputs equilibrium_pair(const EquilibriumSolution& sol) {
  StrategyFn th = sol.strategy_fn();
  return {th, market_price(sol.model), th};
}

CertifyInputs constant_pair(const MarketModel& m, double price, std::vector<double> rates) {
  (void)m;
  StrategyFn th = constant_strategy(std::move(rates));
  return {th, constant_price(price), th};
}

EpsilonCertificate certify(const MarketModel& m, const Hamiltonian& H, const CertifyInputs& pair,
                           const PathBundle& b, const CertifyOptions& opt) {
  const int N = m.num_types, K = b.num_steps;
  const std::size_t n = static_cast<std::size_t>(b.num_paths);
  const double dt = b.dt();

  // Public state and prices under the market maker's conjecture.
  FilterPaths mkt = filter_sde(m, pair.market, b, opt.threads);
  std::vector<double> price(n * (K + 1));
  std::vector<double> theta(n * K * N);
  parallel_for(n, opt.threads, [&](std::size_t j) {
    std::vector<double> th(N);
    for (int k = 0; k <= K; ++k) {
      auto x = mkt.x(static_cast<int>(j), k);
      price[j * (K + 1) + k] = pair.price(k, b.time(k), x);
      if (k < K) {
        pair.insider(k, b.time(k), x, th);
        std::copy(th.begin(), th.end(), theta.begin() + (j * K + k) * N);
      }
    }
  });

  // Price mismatch against the exact filter of the insider's rates.
  FilterPaths exact = filter_exact_open_loop(m, theta, b, opt.threads);
  std::vector<double> mis(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0;
    for (int k = 0; k < K; ++k) {
      double d = price[j * (K + 1) + k] - exact.price(static_cast<int>(j), k);
      s += d * d * dt;
    }
    mis[j] = s;
  }
  EpsilonCertificate c;
  Estimate e2 = sample_mean(mis);
  c.epsilon2 = std::sqrt(std::max(0.0, e2.mean));
  c.epsilon2_se = c.epsilon2 > 0 ? e2.se / (2.0 * c.epsilon2) : 0.0;

  // Sup over deviations: the Hamiltonian BSDE under the market's dynamics.
  std::optional<ValueSurface> surf;
  c.sup_values.assign(N, 0.0);
  if (N <= 3) {
    auto grid = std::make_shared<SimplexGrid>(N, opt.grid_resolution);
    const int nodes = grid->num_nodes();
    std::vector<double> table(static_cast<std::size_t>(K) * nodes * N);
    for (int k = 0; k < K; ++k)
      for (int node = 0; node < nodes; ++node)
        pair.market(k, b.time(k), grid->node(node),
                    std::span<double>(table.data() + (static_cast<std::size_t>(k) * nodes + node) * N, N));
    FeedbackStrategy dyn(grid, K, m.horizon, std::move(table));
    GridSolveOptions go;
    go.num_steps = K;
    go.interior_per_dim = opt.grid_resolution;
    go.threads = opt.threads;
    go.dynamics = &dyn;
    surf = bsde_solve_grid(m, H, pair.price, go);
    for (int i = 0; i < N; ++i) c.sup_values[i] = surf->u_at(i, 0, m.prior);
  } else {
    RegressResult r = bsde_solve_regress(m, H, mkt, b, opt.basis_degree, opt.threads);
    c.sup_values = r.Y0;
  }

  // Strategy values. The control variate Σ M_k (Z_k + Y_k θ_k) ΔB_k has mean
  // zero for any adapted Y, Z; the sup surface supplies them.
  c.strategy_values.assign(N, 0.0);
  c.strategy_values_plain.assign(N, 0.0);
  c.strategy_values_plain_se.assign(N, 0.0);
  c.per_type_gaps.assign(N, 0.0);
  c.gap_se.assign(N, 0.0);
  std::vector<double> plain(n * N), cv(n * N);
  parallel_for(n, opt.threads, [&](std::size_t j) {
    auto dB = b.increments(static_cast<int>(j));
    for (int i = 0; i < N; ++i) {
      double L = 0, G = 0, cvsum = 0;
      for (int k = 0; k < K; ++k) {
        const double th = theta[(j * K + k) * N + i];
        const double g = (m.values[i] - price[j * (K + 1) + k]) * th - H.cost(th);
        const double M = std::exp(L);
        G += g * dt;
        cvsum += M * g * dt;
        if (surf && opt.control_variate) {
          auto x = mkt.x(static_cast<int>(j), k);
          const double Y = surf->u_at(i, k, x), Z = surf->zeta_at(i, k, x);
          cvsum -= M * (Z + Y * th) * dB[k];
        }
        L += th * dB[k] - 0.5 * th * th * dt;
      }
      plain[j * N + i] = std::exp(L) * G;
      cv[j * N + i] = cvsum;
    }
  });
  std::vector<double> col(n), mix(n, 0.0);
  for (int i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < n; ++j) col[j] = plain[j * N + i];
    Estimate ep = sample_mean(col);
    c.strategy_values_plain[i] = ep.mean;
    c.strategy_values_plain_se[i] = ep.se;
    const std::vector<double>& src = opt.control_variate ? cv : plain;
    for (std::size_t j = 0; j < n; ++j) {
      col[j] = src[j * N + i];
      mix[j] += m.prior[i] * (c.sup_values[i] - col[j]);
    }
    Estimate ej = sample_mean(col);
    c.strategy_values[i] = ej.mean;
    c.per_type_gaps[i] = c.sup_values[i] - ej.mean;
    c.gap_se[i] = ej.se;
  }
  Estimate e1 = sample_mean(mix);
  c.epsilon1 = e1.mean;
  c.epsilon1_se = e1.se;
  c.epsilon = std::max(std::max(c.epsilon1, 0.0), c.epsilon2);
  c.dt = dt;
  c.num_paths = b.num_paths;
  c.seed = b.seed;
  c.verdicts["epsilon1_nonnegative_within_noise"] = c.epsilon1 >= -3.0 * c.epsilon1_se;
  c.verdicts["epsilon2_nonnegative"] = c.epsilon2 >= 0.0;
  return c;
}

std::vector<SetValueSample> setvalue_probe(const MarketModel& m, const std::vector<std::vector<double>>& candidates,
                                           const std::vector<EpsilonCertificate>& pairs,
                                           const std::vector<double>& levels) {
  std::vector<SetValueSample> out;
  for (const auto& y : candidates) {
    if (static_cast<int>(y.size()) != m.num_types) throw DomainError("setvalue_probe: candidate has wrong length");
    for (const auto& c : pairs)
      for (double eps : levels) {
        SetValueSample s;
        s.y = y;
        s.pair_epsilon = c.epsilon;
        s.level = eps;
        for (int i = 0; i < m.num_types; ++i) s.gap += m.prior[i] * std::abs(y[i] - c.strategy_values[i]);
        s.member = s.gap <= eps && c.epsilon <= eps;
        out.push_back(std::move(s));
      }
  }
  return out;
}

}  // namespace kylelab
