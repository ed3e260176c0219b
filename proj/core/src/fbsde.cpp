#include "kylelab/fbsde.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"
#include "kylelab/rng.hpp"

namespace kylelab {

std::string to_string(SolverKind s) { return s == SolverKind::Grid ? "grid" : "regress"; }

namespace {

constexpr std::uint32_t kInitStream = 0x1217;

double init_scale(const MarketModel& m) { return m.unbounded() ? 1.0 : m.action_bound; }

// Initial rates. ±bound push each type towards (or away from) its own value:
// θ_i = ±a·sign(v_i - v̄). A common sign for all types would leave the filter
// frozen and coincide with the zero start.
double initial_rate(const MarketModel& m, const SolverSettings& s, int i, std::uint64_t cell, Substream* rng) {
  const double a = init_scale(m);
  const double dir = m.values[i] >= m.mean_value() ? 1.0 : -1.0;
  switch (s.init) {
    case PicardInit::Zero: return 0.0;
    case PicardInit::PlusBound: return a * dir;
    case PicardInit::MinusBound: return -a * dir;
    case PicardInit::Random: return a * (2.0 * rng->uniform() - 1.0);
  }
  (void)cell;
  return 0.0;
}

std::string picard_failure(const std::vector<double>& d, double tol) {
  std::ostringstream os;
  os.precision(6);
  os << "Picard iteration did not reach tolerance " << tol << " in " << d.size() << " iterations (last delta "
     << (d.empty() ? 0.0 : d.back()) << ")";
  return os.str();
}

void simulate_equilibrium(EquilibriumSolution& sol, int threads) {
  const MarketModel& m = sol.model;
  const int K = sol.disc.num_steps, N = m.num_types;
  sol.paths = filter_sde(m, sol.strategy_fn(), sol.bundle, threads);
  sol.final_clip_events = sol.paths.clip_events;
  sol.max_sum_defect = sol.paths.max_sum_defect;
  const std::size_t n = static_cast<std::size_t>(sol.bundle.num_paths);
  sol.Y.assign(n * (K + 1) * N, 0.0);
  sol.Z.assign(n * K * N, 0.0);
  parallel_for(n, threads, [&](std::size_t j) {
    for (int k = 0; k < K; ++k) {
      auto x = sol.paths.x(static_cast<int>(j), k);
      for (int i = 0; i < N; ++i) {
        sol.Y[(j * (K + 1) + k) * N + i] = sol.value(i, k, x);
        sol.Z[(j * K + k) * N + i] = sol.zeta(i, k, x);
      }
    }
  });
}

EquilibriumSolution solve_grid(const MarketModel& m, const Discretization& disc, const SolverSettings& st,
                               const FbsdeOptions& opt, const Hamiltonian& H) {
  EquilibriumSolution sol;
  sol.model = m;
  sol.disc = disc;
  sol.settings = st;
  sol.solver = SolverKind::Grid;
  const int N = m.num_types, K = disc.num_steps;
  auto grid = std::make_shared<SimplexGrid>(N, disc.simplex_grid);
  const int nodes = grid->num_nodes();

  std::vector<double> rates(static_cast<std::size_t>(K) * nodes * N);
  for (int k = 0; k < K; ++k)
    for (int node = 0; node < nodes; ++node) {
      const std::uint64_t cell = static_cast<std::uint64_t>(k) * nodes + node;
      Substream rng(st.init_seed, kInitStream, cell);
      for (int i = 0; i < N; ++i) rates[cell * N + i] = initial_rate(m, st, i, cell, &rng);
    }

  GridSolveOptions go;
  go.num_steps = K;
  go.interior_per_dim = disc.simplex_grid;
  go.explicit_driver = st.explicit_driver;
  go.threads = opt.threads;
  PriceMap price = market_price(m);

  std::optional<ValueSurface> prev;
  for (int it = 0; it < st.picard_max_iter; ++it) {
    FeedbackStrategy dyn(grid, K, m.horizon, rates);
    go.dynamics = &dyn;
    ValueSurface s = bsde_solve_grid(m, H, price, go);
    double delta = 0;
    if (prev) {
      delta = s.distance(*prev);
    } else {
      for (std::size_t c = 0; c < s.u.size(); ++c) delta = std::max({delta, std::abs(s.u[c]), std::abs(s.zeta[c])});
    }
    sol.log.deltas.push_back(delta);
    if (st.damping > 0)
      for (std::size_t c = 0; c < rates.size(); ++c) rates[c] = (1.0 - st.damping) * s.theta[c] + st.damping * rates[c];
    else
      rates = s.theta;
    prev = std::move(s);
    if (delta < st.picard_tol) {
      sol.log.converged = true;
      break;
    }
  }
  if (!sol.log.converged) throw PicardNonConvergence(sol.log.deltas, picard_failure(sol.log.deltas, st.picard_tol));
  sol.surface = std::move(prev);
  sol.Y0.resize(N);
  sol.Y0_se.assign(N, 0.0);
  for (int i = 0; i < N; ++i) sol.Y0[i] = sol.surface->u_at(i, 0, m.prior);
  return sol;
}

EquilibriumSolution solve_regress(const MarketModel& m, const Discretization& disc, const SolverSettings& st,
                                  const FbsdeOptions& opt, const Hamiltonian& H) {
  EquilibriumSolution sol;
  sol.model = m;
  sol.disc = disc;
  sol.settings = st;
  sol.solver = SolverKind::Regress;
  const int N = m.num_types, K = disc.num_steps;
  sol.bundle = gen_paths(disc.num_paths, K, m.horizon, disc.seed, 0, opt.threads);

  // Initial rates constant in x: one draw per (step, type) for the random start.
  std::vector<double> init(static_cast<std::size_t>(K) * N);
  for (int k = 0; k < K; ++k) {
    Substream rng(st.init_seed, kInitStream, static_cast<std::uint64_t>(k));
    for (int i = 0; i < N; ++i) init[static_cast<std::size_t>(k) * N + i] = initial_rate(m, st, i, k, &rng);
  }
  const double T = m.horizon;
  StrategyFn strategy = [init, K, N, T](int, double t, std::span<const double>, std::span<double> out) {
    int k = std::clamp(static_cast<int>(std::floor(t / T * K + 1e-9)), 0, K - 1);
    for (int i = 0; i < N; ++i) out[i] = init[static_cast<std::size_t>(k) * N + i];
  };

  std::optional<RegressResult> prev;
  FilterPaths last_paths;
  for (int it = 0; it < st.picard_max_iter; ++it) {
    FilterPaths f = filter_sde(m, strategy, sol.bundle, opt.threads);
    RegressResult r = bsde_solve_regress(m, H, f, sol.bundle, disc.basis_degree, opt.threads);
    double delta = 0;
    if (prev) {
      for (std::size_t c = 0; c < r.Y.size(); ++c) delta = std::max(delta, std::abs(r.Y[c] - prev->Y[c]));
      for (std::size_t c = 0; c < r.Z.size(); ++c) delta = std::max(delta, std::abs(r.Z[c] - prev->Z[c]));
    } else {
      for (double v : r.Y) delta = std::max(delta, std::abs(v));
      for (double v : r.Z) delta = std::max(delta, std::abs(v));
    }
    sol.log.deltas.push_back(delta);

    auto surf = std::make_shared<const RegressionSurface>(r.surface);
    auto hp = std::make_shared<const Hamiltonian>(H);
    StrategyFn fresh = [surf, hp, m, K, T](int, double t, std::span<const double> x, std::span<double> out) {
      int k = std::clamp(static_cast<int>(std::floor(t / T * K + 1e-9)), 0, K - 1);
      double p = price_of(m, x);
      for (int i = 0; i < m.num_types; ++i) out[i] = hp->dH(m.values[i] - p + surf->z_at(i, k, x));
    };
    if (st.damping > 0) {
      const double d = st.damping;
      StrategyFn old = strategy;
      strategy = [fresh, old, d](int k, double t, std::span<const double> x, std::span<double> out) {
        std::vector<double> o(out.size());
        fresh(k, t, x, out);
        old(k, t, x, o);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - d) * out[i] + d * o[i];
      };
    } else {
      strategy = fresh;
    }
    prev = std::move(r);
    last_paths = std::move(f);
    if (delta < st.picard_tol) {
      sol.log.converged = true;
      break;
    }
  }
  if (!sol.log.converged) throw PicardNonConvergence(sol.log.deltas, picard_failure(sol.log.deltas, st.picard_tol));
  sol.regression = std::move(prev);
  sol.Y0 = sol.regression->Y0;
  sol.Y0_se = sol.regression->Y0_se;
  sol.warnings = sol.regression->warnings;
  (void)last_paths;
  return sol;
}

}  // namespace

double EquilibriumSolution::zeta(int i, int k, std::span<const double> x) const {
  if (surface) return surface->zeta_at(i, k, x);
  return regression->surface.z_at(i, std::min(k, disc.num_steps - 1), x);
}

double EquilibriumSolution::value(int i, int k, std::span<const double> x) const {
  if (surface) return surface->u_at(i, k, x);
  if (k >= disc.num_steps) return 0.0;
  const double z = regression->surface.z_at(i, k, x);
  return regression->surface.continuation_at(i, k, x) + dt() * hamiltonian->H(model.values[i] - price_of(model, x) + z);
}

void EquilibriumSolution::theta_star(int k, std::span<const double> x, std::span<double> out) const {
  const double p = price_of(model, x);
  for (int i = 0; i < model.num_types; ++i) out[i] = hamiltonian->dH(model.values[i] - p + zeta(i, k, x));
}

StrategyFn EquilibriumSolution::strategy_fn() const {
  auto self = std::make_shared<EquilibriumSolution>();
  self->model = model;
  self->disc = disc;
  self->surface = surface;
  self->regression = regression;
  self->hamiltonian = hamiltonian;
  auto hp = hamiltonian;
  return [self, hp](int, double t, std::span<const double> x, std::span<double> out) {
    const int K = self->disc.num_steps;
    int k = std::clamp(static_cast<int>(std::floor(t / self->model.horizon * K + 1e-9)), 0, K - 1);
    const double p = price_of(self->model, x);
    for (int i = 0; i < self->model.num_types; ++i)
      out[i] = hp->dH(self->model.values[i] - p + self->zeta(i, k, x));
  };
}

EquilibriumSolution solve_fbsde(const MarketModel& m, const Discretization& disc, const SolverSettings& st,
                                const FbsdeOptions& opt) {
  validate(m);
  Hamiltonian H(m);
  SolverKind kind = opt.solver;
  if (kind == SolverKind::Grid && m.num_types > 3) kind = SolverKind::Regress;
  EquilibriumSolution sol = kind == SolverKind::Grid ? solve_grid(m, disc, st, opt, H) : solve_regress(m, disc, st, opt, H);
  sol.hamiltonian = std::make_shared<const Hamiltonian>(H);
  if (kind != opt.solver) sol.warnings.push_back("grid solver needs N <= 3; used the regression solver");
  const int paths = opt.sample_paths < 0 ? disc.num_paths : opt.sample_paths;
  if (paths > 0) {
    if (sol.bundle.num_paths == 0) sol.bundle = gen_paths(paths, disc.num_steps, m.horizon, disc.seed, 0, opt.threads);
    else if (paths < sol.bundle.num_paths) sol.bundle = sol.bundle.head(paths);
    simulate_equilibrium(sol, opt.threads);
  }
  return sol;
}

ContractionReport picard_diagnostics(const PicardLog& log) {
  ContractionReport r;
  const auto& d = log.deltas;
  for (std::size_t n = 1; n < d.size(); ++n)
    if (d[n - 1] > 0) r.ratios.push_back(d[n] / d[n - 1]);
  r.monotone = true;
  for (std::size_t n = 1; n < d.size(); ++n)
    if (d[n] > d[n - 1]) r.monotone = false;
  r.geometric = !r.ratios.empty();
  for (std::size_t n = 1; n < r.ratios.size(); ++n)
    if (!(r.ratios[n] < 1.0)) r.geometric = false;
  const std::size_t tail = std::min<std::size_t>(5, r.ratios.size());
  if (tail) {
    double lg = 0;
    int used = 0;
    for (std::size_t n = r.ratios.size() - tail; n < r.ratios.size(); ++n)
      if (r.ratios[n] > 0) {
        lg += std::log(r.ratios[n]);
        ++used;
      }
    r.tail_ratio = used ? std::exp(lg / used) : 0.0;
  }
  r.diverging = tail > 0 && r.tail_ratio > 1.0;
  if (log.converged && r.geometric) r.verdict = "geometric-decay";
  else if (r.diverging) r.verdict = "divergence";
  else if (log.converged) r.verdict = "geometric-decay";
  else r.verdict = "stagnation";
  return r;
}

std::vector<HorizonProbe> horizon_sweep(const MarketModel& m, const Discretization& disc, const SolverSettings& st,
                                        const std::vector<double>& horizons, const FbsdeOptions& opt) {
  std::vector<HorizonProbe> out;
  FbsdeOptions o = opt;
  o.sample_paths = 0;
  for (double T : horizons) {
    MarketModel mt = m;
    mt.horizon = T;
    try {
      auto sol = solve_fbsde(mt, disc, st, o);
      out.push_back({T, true, static_cast<int>(sol.log.deltas.size()), sol.log.deltas.back()});
    } catch (const PicardNonConvergence& e) {
      out.push_back({T, false, static_cast<int>(e.deltas().size()), e.deltas().empty() ? 0.0 : e.deltas().back()});
    }
  }
  return out;
}

FeedbackStrategy extract_strategy(const EquilibriumSolution& sol) {
  if (sol.surface) return sol.surface->feedback();
  const int N = sol.model.num_types, K = sol.disc.num_steps;
  if (N > 3) throw DomainError("extract_strategy: tabulation needs N <= 3");
  auto grid = std::make_shared<SimplexGrid>(N, sol.disc.simplex_grid);
  const int nodes = grid->num_nodes();
  std::vector<double> v(static_cast<std::size_t>(K) * nodes * N);
  std::vector<double> th(N);
  for (int k = 0; k < K; ++k)
    for (int node = 0; node < nodes; ++node) {
      sol.theta_star(k, grid->node(node), th);
      std::copy(th.begin(), th.end(), v.begin() + (static_cast<std::size_t>(k) * nodes + node) * N);
    }
  return FeedbackStrategy(grid, K, sol.model.horizon, std::move(v));
}

}  // namespace kylelab
