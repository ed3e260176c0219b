// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <kylelab/bridge.hpp>
#include <kylelab/fbsde.hpp>
#include <kylelab/hamiltonian.hpp>
#include <kylelab/levelset.hpp>
#include <kylelab/simulate.hpp>
#include <kylelab/stats.hpp>
#include <kylelab/verify.hpp>

#include "frozen_constants.hpp"
#include "instances.hpp"

using namespace kylelab;

namespace tol {
constexpr double kHamiltonian = 1e-12;
constexpr double kEnvelopeFd = 1e-6;
constexpr double kEnvelopeStep = 1e-4;
constexpr double kTanh = 1e-12;
constexpr double kPicard = 1e-8;
constexpr int kPicardCap = 60;
constexpr double kSymmetry = 1e-6;
constexpr double kOneStepOracle = 1e-9;
constexpr double kUniqueness = 1e-6;
constexpr double kZeroPairGrid = 1e-3;
constexpr double kSigmas = 3.0;
constexpr double kEtaSlopeLo = -1.0, kEtaSlopeHi = -0.3;
constexpr double kEps2SlopeLo = -0.8, kEps2SlopeHi = -0.3;
constexpr double kRunningTerm = 1e-4;
constexpr double kTranslation = 1e-12;
constexpr double kToyBand = 0.2;
constexpr double kNonMarkovZ = 6.0, kMarkovZ = 4.0;
}  // namespace tol

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<void(Outcome&)> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

FbsdeOptions quiet(int sample_paths) {
  FbsdeOptions o;
  o.sample_paths = sample_paths;
  return o;
}

EquilibriumSolution canonical(int steps, SolverSettings s = {}, int sample_paths = 0) {
  return solve_fbsde(instances::canonical(), instances::disc(steps, 201, std::max(sample_paths, 1)), s,
                     quiet(sample_paths));
}

void hamiltonian(Outcome& o) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const double eH = std::abs(H.H(1.0) - std::sqrt(2.0)), eD = std::abs(H.dH(1.0) - 1 / std::sqrt(2.0));
  double worst = 0;
  const double h = tol::kEnvelopeStep;
  for (int n = -1000; n <= 1000; ++n) {
    const double z = n * 0.01;
    worst = std::max(worst, std::abs((H.H(z + h) - H.H(z - h)) / (2 * h) - H.dH(z)));
  }
  o.detail << "|H(1)-sqrt2| = " << fmt("%.1e", eH) << ", |dH(1)-1/sqrt2| = " << fmt("%.1e", eD)
           << ", max envelope FD error on [-10,10] = " << fmt("%.1e", worst);
  o.check(eH <= tol::kHamiltonian && eD <= tol::kHamiltonian, "H(1), dH(1)");
  o.check(worst <= tol::kEnvelopeFd, "envelope FD");
}

void filter(Outcome& o) {
  const MarketModel m = instances::canonical(1.0);
  const PathBundle fine = gen_paths(10000, 1024, 1.0, 42);

  const PathBundle b32 = fine.coarsen(32);
  bool prior_kept = true;
  for (const FilterPaths& f : {filter_exact(m, constant_strategy({0, 0}), b32),
                               filter_sde(m, constant_strategy({0, 0}), b32)})
    for (int j = 0; j < f.num_paths; ++j)
      for (int k = 0; k <= f.num_steps; ++k)
        prior_kept = prior_kept && f.x(j, k)[0] == m.prior[0] && f.x(j, k)[1] == m.prior[1] &&
                     f.price(j, k) == price_of(m, m.prior);
  o.check(prior_kept, "zero strategy keeps the prior");

  const StrategyFn s = constant_strategy({1, -1});
  const PathBundle b128 = fine.coarsen(8);
  const FilterPaths e = filter_exact(m, s, b128);
  double tanh_err = 0;
  for (int j = 0; j < e.num_paths; ++j) {
    double B = 0;
    for (int k = 0; k <= e.num_steps; ++k) {
      tanh_err = std::max(tanh_err, std::abs(e.price(j, k) - std::tanh(B)));
      if (k < e.num_steps) B += b128.increments(j)[k];
    }
  }
  o.check(tanh_err <= tol::kTanh, "tanh instance");

  std::vector<double> rms;
  for (int factor : {32, 16, 8, 4, 2, 1}) {
    const PathBundle b = fine.coarsen(factor);
    const FilterPaths ex = filter_exact(m, s, b), sd = filter_sde(m, s, b);
    double worst = 0;
    for (int k = 1; k <= b.num_steps; ++k) {
      double ss = 0;
      for (int j = 0; j < b.num_paths; ++j) ss += std::pow(sd.x(j, k)[0] - ex.x(j, k)[0], 2);
      worst = std::max(worst, std::sqrt(ss / b.num_paths));
    }
    rms.push_back(worst);
  }
  bool monotone = true;
  for (std::size_t n = 1; n < rms.size(); ++n) monotone = monotone && rms[n] < rms[n - 1];
  o.check(monotone, "RMS monotone");
  o.detail << "prior kept exactly, max |P - tanh B| = " << fmt("%.1e", tanh_err) << ", RMS over dt 2^-5..2^-10:";
  for (double r : rms) o.detail << " " << fmt("%.2e", r);
}

void fbsde(Outcome& o) {
  const EquilibriumSolution sol = canonical(64, {}, 10000);
  const auto& d = sol.log.deltas;
  o.check(sol.log.converged && !d.empty() && d.back() < tol::kPicard && static_cast<int>(d.size()) <= tol::kPicardCap,
          "Picard convergence");
  o.check(sol.final_clip_events == 0, "zero clipping events");

  const ValueSurface& s = *sol.surface;
  const int last = s.grid->num_nodes() - 1;
  double sym = 0;
  for (int k = 0; k <= s.num_steps; ++k)
    for (int n = 0; n <= last; ++n) {
      sym = std::max(sym, std::abs(s.u[s.slot(k, n, 0)] - s.u[s.slot(k, last - n, 1)]));
      sym = std::max(sym, std::abs(s.zeta[s.slot(k, n, 0)] + s.zeta[s.slot(k, last - n, 1)]));
    }
  sym = std::max(sym, std::abs(price_of(sol.model, sol.model.prior)));
  o.check(sym <= tol::kSymmetry, "symmetry");

  const EquilibriumSolution one = canonical(1);
  std::vector<double> th(2);
  one.theta_star(0, one.model.prior, th);
  double oracle_err = 0;
  for (int i = 0; i < 2; ++i) {
    oracle_err = std::max(oracle_err, std::abs(one.Y0[i] - frozen::kCanonicalK1Y0[i]));
    oracle_err = std::max(oracle_err, std::abs(th[i] - frozen::kCanonicalK1Theta0[i]));
  }
  o.check(oracle_err <= tol::kOneStepOracle, "one-step oracle");
  o.detail << d.size() << " iterations, last delta " << fmt("%.1e", d.empty() ? 0.0 : d.back()) << ", clips "
           << sol.final_clip_events << ", symmetry defect " << fmt("%.1e", sym) << ", one-step oracle error "
           << fmt("%.1e", oracle_err) << ", Y0 = " << fmt("%.10f", sol.Y0[0]);
}

void uniqueness(Outcome& o) {
  std::vector<EquilibriumSolution> sols;
  for (auto [init, seed] : std::vector<std::pair<PicardInit, int>>{{PicardInit::Zero, 0},
                                                                   {PicardInit::PlusBound, 0},
                                                                   {PicardInit::MinusBound, 0},
                                                                   {PicardInit::Random, 1},
                                                                   {PicardInit::Random, 2}}) {
    SolverSettings s;
    s.init = init;
    s.init_seed = static_cast<std::uint64_t>(seed);
    sols.push_back(canonical(64, s));
  }
  double worst = 0;
  for (const auto& s : sols) worst = std::max(worst, s.surface->distance(*sols[0].surface));
  o.check(worst <= tol::kUniqueness, "sup-norm agreement");
  o.detail << "5 initialisations, max sup-norm distance of (u, zeta) = " << fmt("%.1e", worst);
}

void certification(Outcome& o) {
  const MarketModel m1 = instances::canonical(1.0);
  const PathBundle b1 = gen_paths(100000, 64, 1.0, 42);
  const EpsilonCertificate zero = certify(m1, Hamiltonian(m1), constant_pair(m1, m1.mean_value(), {0, 0}), b1);
  const double zero_err = std::abs(zero.epsilon1 - frozen::kZeroPairEpsilon1T1);
  o.check(zero_err <= tol::kSigmas * zero.epsilon1_se + tol::kZeroPairGrid, "zero pair epsilon1");

  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const PathBundle fine = gen_paths(100000, 64, m.horizon, 42);
  std::vector<double> eps;
  for (int K : {16, 32, 64}) eps.push_back(certify(m, H, equilibrium_pair(canonical(K)), fine.coarsen(64 / K)).epsilon);
  o.check(eps[0] > eps[1] && eps[1] > eps[2], "epsilon monotone under refinement");
  o.detail << "zero pair epsilon1 = " << fmt("%.6f", zero.epsilon1) << " (se " << fmt("%.1e", zero.epsilon1_se)
           << "), equilibrium epsilon at T/16, T/32, T/64: " << fmt("%.3e", eps[0]) << ", " << fmt("%.3e", eps[1])
           << ", " << fmt("%.3e", eps[2]);
}

void bridge(Outcome& o) {
  BridgeRunOptions opt;
  opt.num_paths = 100000;
  bool values_ok = true;
  o.detail << "J0 z-scores:";
  for (double v : {-2.0, 0.0, 1.0}) {
    const BridgeValueCheck c = bridge_value_check(v, 64, opt);
    const double z = (c.running.mean - c.closed_form) / c.running.se;
    values_ok = values_ok && std::abs(z) <= tol::kSigmas;
    o.detail << " " << fmt("%+.2f", z);
  }
  o.check(values_ok, "J0 closed form");

  const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 0.9};
  const BridgePaths p = simulate_bridge(times, 100000, opt.seed);
  double worst_z = 0;
  for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0})
    for (int k = 1; k < static_cast<int>(times.size()); ++k) {
      const double t = times[k];
      std::vector<double> d(p.num_paths);
      for (int j = 0; j < p.num_paths; ++j) d[j] = std::pow(p.q(j, k, v) - v, 2);
      const Estimate e = sample_mean(d);
      worst_z = std::max(worst_z, std::abs(e.mean - (v * v * (1 - t) * (1 - t) + t * (1 - t))) / e.se);
    }
  o.check(worst_z <= tol::kSigmas, "pinning moments");

  const RateReport r = truncation_rate({4, 16, 64}, opt);
  o.check(r.eta_slope >= tol::kEtaSlopeLo && r.eta_slope <= tol::kEtaSlopeHi, "eta slope");
  o.check(r.eps2_slope >= tol::kEps2SlopeLo && r.eps2_slope <= tol::kEps2SlopeHi, "eps2 slope");
  o.detail << "; pinning max |z| = " << fmt("%.2f", worst_z) << "; eta slope " << fmt("%.4f", r.eta_slope)
           << " (band [-1.0, -0.3]), eps2 slope " << fmt("%.4f", r.eps2_slope) << " (band [-0.8, -0.3])";
}

void levelset(Outcome& o) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  const PathBundle fine = gen_paths(10000, 64, m.horizon, 42);
  std::vector<double> total;
  double running64 = 0;
  LevelSetReport at64;
  EquilibriumSolution sol64;
  for (int K : {16, 32, 64}) {
    EquilibriumSolution sol = canonical(K);
    const LevelSetReport r = eval_cost(m, H, sol.Y0, equilibrium_controls(sol), fine.coarsen(64 / K));
    total.push_back(r.total.mean);
    if (K == 64) {
      running64 = 0;
      for (const Estimate& e : r.running) running64 += e.mean;
      at64 = r;
      sol64 = std::move(sol);
    }
  }
  o.check(total[0] > total[1] && total[1] > total[2], "sum J decreasing");
  o.check(running64 < tol::kRunningTerm, "running term");

  std::vector<double> y = sol64.Y0;
  for (double& v : y) v += 0.5;
  const LevelSetReport shifted = eval_cost(m, H, y, equilibrium_controls(sol64), fine);
  double trans = 0;
  for (std::size_t n = 0; n < at64.Y_T.size(); ++n)
    trans = std::max(trans, std::abs(shifted.Y_T[n] - at64.Y_T[n] - 0.5));
  o.check(trans <= tol::kTranslation, "translation identity");

  const MarketModel one = instances::single(0.5, 1.0);
  const PathBundle b1 = gen_paths(10000, 64, 1.0, 42);
  double worst = 0;
  bool closed = true;
  for (double yv : {0.5, 1.0, 1.5, 2.0}) {
    const LevelSetReport r = eval_cost(one, Hamiltonian(one), std::vector<double>{yv}, zero_controls(one, 64), b1);
    const double err = std::abs(r.cost[0].mean - (yv - 1.0) * (yv - 1.0));
    worst = std::max(worst, err);
    closed = closed && err <= tol::kSigmas * r.cost[0].se + tol::kTranslation;
  }
  o.check(closed, "N=1 closed form");
  o.detail << "sum J at T/16, T/32, T/64: " << fmt("%.3e", total[0]) << ", " << fmt("%.3e", total[1]) << ", "
           << fmt("%.3e", total[2]) << "; running term at T/64 " << fmt("%.1e", running64)
           << "; translation defect " << fmt("%.1e", trans) << "; N=1 max error " << fmt("%.1e", worst);
}

void markov(Outcome& o) {
  std::vector<std::string> toy, eq, bm;
  double toy_worst = 0;
  bool toy_ok = true, eq_ok = true, bm_ok = true;
  for (std::uint64_t seed = 42; seed < 47; ++seed) {
    const MarkovSample s = markov_toy_sample(100000, 0.5, 0.1, seed);
    const MarkovTestReport r = markov_test(s.s_t, s.s_next, s.aux);
    toy_ok = toy_ok && std::abs(r.coefficient + 0.1) <= tol::kToyBand * 0.1 && std::abs(r.z) > tol::kNonMarkovZ;
    toy_worst = std::max(toy_worst, std::abs(r.coefficient + 0.1) / 0.1);
    toy.push_back(r.verdict);

    const MarkovSample w = markov_brownian_sample(100000, 0.5, 0.1, seed);
    const MarkovTestReport rb = markov_test(w.s_t, w.s_next, w.aux);
    bm_ok = bm_ok && std::abs(rb.z) < tol::kMarkovZ;
    bm.push_back(rb.verdict);

    FbsdeOptions fo = quiet(100000);
    const EquilibriumSolution sol = solve_fbsde(instances::canonical(), instances::disc(64, 201, 100000, seed), {}, fo);
    const MarkovSample e = markov_filter_sample(sol.paths, 32, 8);
    const MarkovTestReport re = markov_test(e.s_t, e.s_next, e.aux);
    eq_ok = eq_ok && std::abs(re.z) < tol::kMarkovZ;
    eq.push_back(re.verdict);
  }
  auto stable = [](const std::vector<std::string>& v) {
    return std::all_of(v.begin(), v.end(), [&](const std::string& s) { return s == v[0]; });
  };
  o.check(toy_ok && toy[0] == "non-Markov", "toy flagged non-Markov");
  o.check(eq_ok && eq[0] == "Markov-consistent", "equilibrium Markov-consistent");
  o.check(bm_ok && bm[0] == "Markov-consistent", "Brownian Markov-consistent");
  o.check(stable(toy) && stable(eq) && stable(bm), "verdicts stable over 5 seeds");
  o.detail << "toy: " << toy[0] << " (max relative coefficient error " << fmt("%.2f", toy_worst)
           << "), equilibrium: " << eq[0] << ", Brownian: " << bm[0];
}

void reproducibility(Outcome& o) {
  const MarketModel m = instances::canonical();
  const Hamiltonian H(m);
  int checked = 0;
  auto same = [&](bool ok, const std::string& what) {
    ++checked;
    o.check(ok, what);
  };
  for (SolverKind kind : {SolverKind::Grid, SolverKind::Regress}) {
    std::vector<EquilibriumSolution> s;
    for (int threads : {1, 1, 4}) {
      FbsdeOptions fo = quiet(2000);
      fo.solver = kind;
      fo.threads = threads;
      s.push_back(solve_fbsde(m, instances::disc(32, 101, 5000), {}, fo));
    }
    for (int r = 1; r < 3; ++r)
      same(s[r].Y0 == s[0].Y0 && s[r].Y0_se == s[0].Y0_se && s[r].Y == s[0].Y && s[r].paths.X == s[0].paths.X &&
               s[r].log.deltas == s[0].log.deltas,
           "solve " + to_string(kind));

    std::vector<EpsilonCertificate> c;
    for (int threads : {1, 1, 4}) {
      CertifyOptions co;
      co.threads = threads;
      co.grid_resolution = 101;
      c.push_back(certify(m, H, equilibrium_pair(s[0]), gen_paths(5000, 32, m.horizon, 42, 0, threads), co));
    }
    for (int r = 1; r < 3; ++r)
      same(to_json(c[r]).dump() == to_json(c[0]).dump(), "certify " + to_string(kind));

    if (kind == SolverKind::Grid) {
      std::vector<LevelSetReport> l;
      for (int threads : {1, 1, 4})
        l.push_back(eval_cost(m, H, s[0].Y0, equilibrium_controls(s[0]), s[0].bundle, threads));
      for (int r = 1; r < 3; ++r) same(l[r].to_json().dump() == l[0].to_json().dump() && l[r].Y_T == l[0].Y_T,
                                       "levelset");
    }
  }

  std::vector<RateReport> rates;
  for (int threads : {1, 1, 4}) {
    BridgeRunOptions bo;
    bo.num_paths = 5000;
    bo.threads = threads;
    rates.push_back(truncation_rate({4, 16, 64}, bo));
  }
  for (int r = 1; r < 3; ++r) same(rates[r].to_json().dump() == rates[0].to_json().dump(), "bridge");

  std::vector<MarkovSample> ms;
  for (int rerun = 0; rerun < 2; ++rerun) ms.push_back(markov_toy_sample(5000, 0.5, 0.1, 42));
  same(ms[1].s_t == ms[0].s_t && ms[1].s_next == ms[0].s_next && ms[1].aux == ms[0].aux, "markov toy");
  o.detail << checked << " rerun/thread comparisons (threads 1, 1, 4), all bit-identical";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "closed-form Hamiltonian", 1, hamiltonian},
      {2, "filter correctness", 30, filter},
      {3, "canonical FBSDE solve", 120, fbsde},
      {4, "uniqueness probe", 600, uniqueness},
      {5, "epsilon certification", 300, certification},
      {6, "bridge example", 600, bridge},
      {7, "level-set duality", 300, levelset},
      {8, "Markov diagnostic", 180, markov},
      {9, "reproducibility", 600, reproducibility},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (sec > c.limit_seconds) o.check(false, "runtime");
    if (!o.pass) ++failed;
    std::printf("%s [%d] %s (%.1f s, limit %.0f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, sec,
                c.limit_seconds, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
