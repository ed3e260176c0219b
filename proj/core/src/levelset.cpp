#include "kylelab/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kylelab/csv.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"
#include "kylelab/rng.hpp"

namespace kylelab {

namespace {

constexpr std::uint32_t kSearchStream = 0x5EA;

std::vector<double> slice_tables(const std::vector<double>& surface, std::size_t per_step, int K) {
  return {surface.begin(), surface.begin() + static_cast<std::ptrdiff_t>(per_step * K)};
}

// Adds per-(block, type) offsets to the θ and Z tables; θ is clipped to the
// action interval.
ControlPair perturbed(const ControlPair& base, std::span<const double> offsets, int blocks, double bound) {
  const int N = base.theta.num_types();
  auto shift = [&](const FeedbackStrategy& f, std::size_t part, bool clip) {
    std::vector<double> v = f.values();
    const int K = f.num_steps(), nodes = f.grid().num_nodes();
    for (int k = 0; k < K; ++k) {
      const int b = std::min(blocks - 1, k * blocks / K);
      for (int node = 0; node < nodes; ++node)
        for (int i = 0; i < N; ++i) {
          double& x = v[(static_cast<std::size_t>(k) * nodes + node) * N + i];
          x += offsets[part + static_cast<std::size_t>(b) * N + i];
          if (clip && std::isfinite(bound)) x = std::clamp(x, -bound, bound);
        }
    }
    return FeedbackStrategy(f.grid_ptr(), K, f.horizon(), std::move(v));
  };
  const std::size_t half = static_cast<std::size_t>(blocks) * N;
  return {shift(base.theta, 0, true), shift(base.z, half, false), "search"};
}

}  // namespace

ControlPair zero_controls(const MarketModel& m, int num_steps) {
  auto grid = std::make_shared<SimplexGrid>(m.num_types, 1);
  std::vector<double> zero(m.num_types, 0.0);
  return {FeedbackStrategy::constant(grid, num_steps, m.horizon, zero),
          FeedbackStrategy::constant(grid, num_steps, m.horizon, zero), "zero"};
}

ControlPair equilibrium_controls(const EquilibriumSolution& sol) {
  FeedbackStrategy theta = extract_strategy(sol);
  const auto& grid = theta.grid();
  const int N = sol.model.num_types, K = theta.num_steps();
  std::vector<double> z;
  if (sol.surface) {
    z = slice_tables(sol.surface->zeta, static_cast<std::size_t>(grid.num_nodes()) * N, K);
  } else {
    z.resize(static_cast<std::size_t>(K) * grid.num_nodes() * N);
    for (int k = 0; k < K; ++k)
      for (int node = 0; node < grid.num_nodes(); ++node) {
        const auto x = grid.node(node);
        for (int i = 0; i < N; ++i) z[(static_cast<std::size_t>(k) * grid.num_nodes() + node) * N + i] = sol.zeta(i, k, x);
      }
  }
  auto grid_ptr = theta.grid_ptr();
  return {std::move(theta), FeedbackStrategy(grid_ptr, K, sol.model.horizon, std::move(z)), "equilibrium"};
}

LevelSetReport eval_cost(const MarketModel& m, const Hamiltonian& H, std::span<const double> y,
                         const ControlPair& controls, const PathBundle& bundle, int threads) {
  const int N = m.num_types, K = bundle.num_steps;
  if (static_cast<int>(y.size()) != N) throw DomainError("eval_cost: y must have one entry per type");
  const FilterPaths f = filter_sde(m, controls.theta.fn(), bundle, threads);
  const double dt = bundle.dt();
  const std::size_t n = static_cast<std::size_t>(bundle.num_paths);

  std::vector<double> dev(n * N), run(n * N);
  parallel_for(n, threads, [&](std::size_t j) {
    const auto dB = bundle.increments(static_cast<int>(j));
    std::vector<double> z(N);
    for (int k = 0; k < K; ++k) {
      const auto x = f.x(static_cast<int>(j), k);
      controls.z.evaluate(bundle.time(k), x, z);
      const double P = price_of(m, x);
      for (int i = 0; i < N; ++i) {
        const double th = f.theta_at(static_cast<int>(j), k, i);
        const double zh = m.values[i] + z[i] - P;
        const double Hv = H.H(zh);
        const double h = Hv - zh * th + H.cost(th);
        run[j * N + i] += std::pow(std::abs(h), 4.0 / 3.0) * dt;
        dev[j * N + i] += -Hv * dt + z[i] * dB[k];
      }
    }
  });

  LevelSetReport rep;
  rep.y.assign(y.begin(), y.end());
  rep.provenance = controls.provenance;
  rep.Y_T.resize(n * N);
  std::vector<double> term(n), runv(n), tot(n), all(n, 0.0);
  for (int i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double yt = y[i] + dev[j * N + i];
      rep.Y_T[j * N + i] = yt;
      term[j] = yt * yt;
      runv[j] = run[j * N + i];
      tot[j] = term[j] + runv[j];
      all[j] += tot[j];
    }
    rep.terminal.push_back(sample_mean(term));
    rep.running.push_back(sample_mean(runv));
    rep.cost.push_back(sample_mean(tot));
  }
  rep.total = sample_mean(all);
  return rep;
}

nlohmann::json LevelSetReport::to_json() const {
  nlohmann::json j;
  j["y"] = y;
  j["provenance"] = provenance;
  j["total"] = {{"mean", total.mean}, {"se", total.se}};
  j["per_type"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cost.size(); ++i)
    j["per_type"].push_back({{"cost", cost[i].mean},
                             {"cost_se", cost[i].se},
                             {"terminal", terminal[i].mean},
                             {"terminal_se", terminal[i].se},
                             {"running", running[i].mean},
                             {"running_se", running[i].se}});
  return j;
}

SearchResult search_W(const MarketModel& m, const Hamiltonian& H, std::span<const double> y,
                      const std::vector<ControlPair>& starts, const PathBundle& bundle, const SearchSpec& spec) {
  if (starts.empty()) throw DomainError("search_W: need at least one start");
  const int N = m.num_types, blocks = std::max(1, spec.time_blocks);
  const std::size_t dim = 2 * static_cast<std::size_t>(blocks) * N;
  const double a = H.bound();
  const double th_step = std::isfinite(a) ? spec.theta_step * a : spec.theta_step;

  struct Run {
    std::size_t start;
    std::vector<double> offsets;
  };
  std::vector<Run> runs;
  for (std::size_t s = 0; s < starts.size(); ++s) runs.push_back({s, std::vector<double>(dim, 0.0)});
  for (int r = 0; r < spec.random_restarts; ++r) {
    Substream rng(spec.seed, kSearchStream, static_cast<std::uint64_t>(r));
    std::vector<double> off(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      const double s = c < dim / 2 ? th_step : spec.z_step;
      off[c] = s * (2 * rng.uniform() - 1);
    }
    runs.push_back({0, std::move(off)});
  }

  struct Outcome {
    double value = std::numeric_limits<double>::infinity();
    std::vector<double> offsets;
    std::vector<double> trace;
    int evaluations = 0;
    bool exhausted = false;
  };
  std::vector<Outcome> out(runs.size());
  parallel_for(runs.size(), spec.threads, [&](std::size_t r) {
    const ControlPair& base = starts[runs[r].start];
    Outcome& o = out[r];
    auto value = [&](const std::vector<double>& off) {
      ++o.evaluations;
      return eval_cost(m, H, y, perturbed(base, off, blocks, a), bundle, 1).total.mean;
    };
    std::vector<double> cur = runs[r].offsets;
    double best = value(cur);
    o.trace.push_back(best);
    double scale = 1.0;
    while (scale >= spec.min_step) {
      bool improved = false;
      for (std::size_t c = 0; c < dim; ++c) {
        const double s = scale * (c < dim / 2 ? th_step : spec.z_step);
        for (double sign : {1.0, -1.0}) {
          if (o.evaluations >= spec.max_evaluations) break;
          std::vector<double> trial = cur;
          trial[c] += sign * s;
          const double v = value(trial);
          if (v < best) {
            best = v;
            cur = std::move(trial);
            o.trace.push_back(best);
            improved = true;
            break;
          }
        }
      }
      if (o.evaluations >= spec.max_evaluations) {
        o.exhausted = true;
        break;
      }
      if (!improved) scale *= spec.shrink;
    }
    o.value = best;
    o.offsets = std::move(cur);
  });

  SearchResult res;
  std::size_t arg = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    res.restart_values.push_back(out[r].value);
    res.trace.push_back(out[r].trace);
    res.evaluations += out[r].evaluations;
    res.budget_exhausted = res.budget_exhausted || out[r].exhausted;
    if (out[r].value < out[arg].value) arg = r;
  }
  res.value = out[arg].value;
  res.best = perturbed(starts[runs[arg].start], out[arg].offsets, blocks, a);
  res.best.provenance = arg < starts.size() ? "search from " + starts[arg].provenance : "search from random";
  return res;
}

MembershipMap duality_probe(const EquilibriumSolution& sol, const std::vector<std::vector<double>>& y_grid,
                            const ProbeOptions& opt) {
  const MarketModel& m = sol.model;
  const Hamiltonian& H = *sol.hamiltonian;
  const PathBundle bundle =
      opt.num_paths > 0 && opt.num_paths < sol.bundle.num_paths ? sol.bundle.head(opt.num_paths) : sol.bundle;
  const int threads = opt.search.threads;
  const ControlPair eq = equilibrium_controls(sol);
  const ControlPair zero = zero_controls(m, sol.disc.num_steps);

  MembershipMap map;
  map.Y0 = sol.Y0;
  map.equilibrium_value = eval_cost(m, H, sol.Y0, eq, bundle, threads).total.mean;
  map.level_tol = opt.level_tol >= 0 ? opt.level_tol : std::max(10 * map.equilibrium_value, 1e-8);

  for (const auto& y : y_grid) {
    if (static_cast<int>(y.size()) != m.num_types) throw DomainError("duality_probe: y has the wrong dimension");
    MembershipRow row;
    row.y = y;
    const LevelSetReport at_eq = eval_cost(m, H, y, eq, bundle, threads);
    row.cost_at_equilibrium = at_eq.total.mean;
    row.cost_at_equilibrium_se = at_eq.total.se;
    const SearchResult s = search_W(m, H, y, {eq, zero}, bundle, opt.search);
    row.best_search = std::min(s.value, row.cost_at_equilibrium);
    row.budget_exhausted = s.budget_exhausted;
    row.member = row.best_search < map.level_tol;
    map.rows.push_back(std::move(row));
  }
  return map;
}

nlohmann::json MembershipMap::to_json() const {
  nlohmann::json j;
  j["Y0"] = Y0;
  j["equilibrium_value"] = equilibrium_value;
  j["level_tol"] = level_tol;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"y", r.y},
                         {"cost_at_equilibrium_controls", r.cost_at_equilibrium},
                         {"cost_at_equilibrium_controls_se", r.cost_at_equilibrium_se},
                         {"best_search_value", r.best_search},
                         {"budget_exhausted", r.budget_exhausted},
                         {"verdict", r.member ? "in" : "out"}});
  return j;
}

void MembershipMap::write_csv(std::ostream& os) const {
  CsvWriter w(os);
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < Y0.size(); ++i) cols.push_back("y_" + std::to_string(i + 1));
  for (const char* c : {"cost_at_equilibrium_controls", "best_search_value", "verdict"}) cols.emplace_back(c);
  w.header(cols);
  for (const auto& r : rows) {
    w.values(r.y);
    w << r.cost_at_equilibrium << r.best_search << std::string(r.member ? "in" : "out");
    w.end_row();
  }
}

}  // namespace kylelab
