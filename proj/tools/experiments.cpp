#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include <kylelab/bridge.hpp>
#include <kylelab/error.hpp>
#include <kylelab/levelset.hpp>
#include <kylelab/verify.hpp>

#include "commands.hpp"

namespace kylelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// diag:a:b:n    Y0 + s(1,...,1) for n values of s evenly spaced in [a, b]
// points:y;y..  explicit points, components separated by commas
std::vector<std::vector<double>> parse_y_grid(const std::string& spec, const std::vector<double>& Y0) {
  std::vector<std::vector<double>> out;
  if (spec.rfind("diag:", 0) == 0) {
    std::stringstream ss(spec.substr(5));
    std::string a, b, n;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, n))
      throw ConfigError("--y-grid", "expected diag:a:b:n");
    const double lo = parse_list(a, "--y-grid")[0], hi = parse_list(b, "--y-grid")[0];
    const int count = static_cast<int>(parse_list(n, "--y-grid")[0]);
    if (count < 1) throw ConfigError("--y-grid", "need at least one point");
    for (int l = 0; l < count; ++l) {
      const double s = count == 1 ? lo : lo + (hi - lo) * l / (count - 1);
      std::vector<double> y = Y0;
      for (double& c : y) c += s;
      out.push_back(y);
    }
    return out;
  }
  if (spec.rfind("points:", 0) == 0) {
    std::stringstream ss(spec.substr(7));
    std::string item;
    while (std::getline(ss, item, ';')) {
      out.push_back(parse_list(item, "--y-grid"));
      if (out.back().size() != Y0.size()) throw ConfigError("--y-grid", "point has the wrong dimension");
    }
    if (out.empty()) throw ConfigError("--y-grid", "no points given");
    return out;
  }
  throw ConfigError("--y-grid", "expected diag:a:b:n or points:y1,..;y1,..");
}

}  // namespace

void add_bridge(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("bridge", "Truncated Brownian-bridge equilibrium and its rate");
  struct Opts {
    std::string R = "4,16,64";
    BridgeRunOptions run;
    bool left_point = false;
    bool skip_checks = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--R", o->R, "Truncation levels, comma separated")->capture_default_str();
  sub->add_option("--paths", o->run.num_paths, "Monte Carlo paths")->capture_default_str();
  sub->add_option("--seed", o->run.seed, "Random seed")->capture_default_str();
  sub->add_option("--nodes", o->run.quadrature_nodes, "Gauss-Hermite nodes")->capture_default_str();
  sub->add_option("--steps-per-unit", o->run.steps_per_unit, "Geometric steps per unit of log(1/(1-t))")
      ->capture_default_str();
  sub->add_flag("--left-point", o->left_point, "Left-point sum for the stochastic integral instead of exact sampling");
  sub->add_flag("--skip-checks", o->skip_checks, "Only the rate report; skip the value and fixed-point checks");
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      RunManifest man = make_manifest("bridge");
      StageClock clk(man);
      BridgeRunOptions opt = o->run;
      opt.threads = g.threads;
      opt.integral = o->left_point ? BridgeIntegral::LeftPoint : BridgeIntegral::Exact;
      const std::vector<double> Rs = parse_list(o->R, "--R");
      const fs::path dir = output_dir(g, "bridge");
      man.seed = opt.seed;
      man.threads = g.threads;
      man.inputs = {{"R", Rs}, {"paths", opt.num_paths}, {"nodes", opt.quadrature_nodes},
                    {"steps_per_unit", opt.steps_per_unit}, {"left_point", o->left_point}, {"instance", "bridge"}};

      const RateReport rep = truncation_rate(Rs, opt);
      clk.stage("rate");
      json j = rep.to_json();
      std::printf("%8s %12s %10s %12s %12s %10s %6s\n", "R", "eps2", "eps2_se", "eps2_ident", "eta", "eta_se", "agree");
      for (const auto& r : rep.rows)
        std::printf("%8g %12.6e %10.2e %12.6e %12.6e %10.2e %6s\n", r.R, r.eps2, r.eps2_se, r.eps2_identity, r.eta,
                    r.eta_se, r.estimators_agree ? "yes" : "no");
      std::printf("log-log slope: eps2 %.4f, eta %.4f (eta sqrt(R) <= %.4f)\n", rep.eps2_slope, rep.eta_slope,
                  rep.eta_constant);

      if (!o->skip_checks) {
        const double Rmax = *std::max_element(Rs.begin(), Rs.end());
        j["value_check"] = json::array();
        for (double v : {-2.0, 0.0, 1.0}) {
          const BridgeValueCheck c = bridge_value_check(v, Rmax, opt);
          j["value_check"].push_back({{"v", v}, {"R", Rmax}, {"closed_form", c.closed_form},
                                      {"running", c.running.mean}, {"running_se", c.running.se},
                                      {"terminal", c.terminal.mean}, {"terminal_se", c.terminal.se},
                                      {"hit_fraction", c.hit_fraction}});
          std::printf("J0(v=%g): closed form %.6f, simulated %.6f (se %.1e), truncated terminal %.6f\n", v,
                      c.closed_form, c.running.mean, c.running.se, c.terminal.mean);
        }
        clk.stage("value_check");
        FixedPointOptions fp;
        fp.threads = g.threads;
        fp.seed = opt.seed;
        fp.quadrature_nodes = opt.quadrature_nodes;
        const auto rows = gaussian_fixed_point_check({0.25}, fp);
        j["fixed_point"] = json::array();
        for (const auto& r : rows) {
          j["fixed_point"].push_back({{"t", r.t}, {"R", fp.R}, {"paths", fp.num_paths}, {"threshold", fp.threshold},
                                      {"fraction_below", r.fraction_below}, {"median", r.median},
                                      {"p99", r.p99}, {"max", r.max}});
          std::printf("fixed point t=%g R=%g: %.2f%% of paths below %.0e (p99 %.2e)\n", r.t, fp.R,
                      100 * r.fraction_below, fp.threshold, r.p99);
        }
        clk.stage("fixed_point");
      }
      std::ofstream csv(dir / "rate.csv");
      rep.write_csv(csv);
      write_json(dir / "rate.json", j);
      clk.finish(dir);
      std::printf("report: %s\n", dir.string().c_str());
      return kExitOk;
    };
  });
}

void add_levelset(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("levelset", "Zero-level-set membership of candidate values");
  struct Opts {
    std::string config, solution, y_grid = "diag:-1:1:5";
    ProbeOptions probe;
  };
  auto o = std::make_shared<Opts>();
  auto* cfg_opt = sub->add_option("--config", o->config, "Model configuration (solved in place)");
  auto* sol_opt = sub->add_option("--solution", o->solution, "Solution archive written by solve");
  cfg_opt->excludes(sol_opt);
  sub->add_option("--y-grid", o->y_grid, "diag:a:b:n | points:y1,..;y1,..")->capture_default_str();
  sub->add_option("--level-tol", o->probe.level_tol, "Membership threshold (default 10x the equilibrium value)");
  sub->add_option("--search-paths", o->probe.num_paths, "Paths used by the search")->capture_default_str();
  sub->add_option("--budget", o->probe.search.max_evaluations, "Evaluations per search restart")->capture_default_str();
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      RunManifest man = make_manifest("levelset");
      StageClock clk(man);
      Config cfg;
      EquilibriumSolution sol;
      if (!o->solution.empty()) {
        sol = load_solution(o->solution, g.threads, cfg);
      } else if (!o->config.empty()) {
        cfg = load_config_file(o->config);
        FbsdeOptions fo;
        fo.threads = g.threads;
        sol = solve_fbsde(cfg.model, cfg.disc, cfg.solver, fo);
      } else {
        throw ConfigError("levelset", "one of --config or --solution is required");
      }
      print_warnings(cfg.warnings);
      clk.stage("solve");
      const fs::path dir = output_dir(g, "levelset");
      man.config_path = o->solution.empty() ? o->config : (fs::path(o->solution) / "config.json").string();
      man.seed = cfg.disc.seed;
      man.threads = g.threads;
      man.inputs = {{"y_grid", o->y_grid}, {"instance", instance_label(cfg.model)}};

      const ControlPair eq = equilibrium_controls(sol);
      const LevelSetReport at_y0 = eval_cost(sol.model, *sol.hamiltonian, sol.Y0, eq, sol.bundle, g.threads);
      clk.stage("eval_cost");
      ProbeOptions po = o->probe;
      po.search.threads = g.threads;
      const MembershipMap map = duality_probe(sol, parse_y_grid(o->y_grid, sol.Y0), po);
      clk.stage("probe");

      std::ofstream csv(dir / "membership.csv");
      map.write_csv(csv);
      json j = map.to_json();
      j["at_Y0"] = at_y0.to_json();
      j["instance"] = instance_label(cfg.model);
      j["num_steps"] = cfg.disc.num_steps;
      write_json(dir / "levelset.json", j);
      clk.finish(dir);

      std::printf("sum J at (theta*, zeta*, Y0): %.4e (se %.1e), running part", at_y0.total.mean, at_y0.total.se);
      for (const auto& r : at_y0.running) std::printf(" %.2e", r.mean);
      std::printf("\nlevel tolerance %.3e\n", map.level_tol);
      for (const auto& r : map.rows) {
        std::printf("  y = (");
        for (std::size_t i = 0; i < r.y.size(); ++i) std::printf(i ? ", %.6f" : "%.6f", r.y[i]);
        std::printf(")  at equilibrium controls %.4e, best search %.4e  -> %s\n", r.cost_at_equilibrium,
                    r.best_search, r.member ? "in" : "out");
      }
      std::printf("map: %s\n", (dir / "membership.csv").string().c_str());
      return kExitOk;
    };
  });
}

void add_markov_test(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("markov-test", "Regression test of the Markov property of a price process");
  struct Opts {
    std::string config, toy;
    int paths = 100000, degree = 1, seeds = 1;
    double t = -1, delta = -1;
    long long seed = -1;
  };
  auto o = std::make_shared<Opts>();
  auto* cfg_opt = sub->add_option("--config", o->config, "Equilibrium price of this model, auxiliary X^1");
  auto* toy_opt = sub->add_option("--toy", o->toy, "appendix-sg | brownian")
                      ->check(CLI::IsMember({"appendix-sg", "brownian"}));
  cfg_opt->excludes(toy_opt);
  sub->add_option("--paths", o->paths, "Sample paths")->capture_default_str();
  sub->add_option("--t", o->t, "Observation time (default 0.5, or T/2 for a model)");
  sub->add_option("--delta", o->delta, "Increment length (default 0.1, or T/8 for a model)");
  sub->add_option("--degree", o->degree, "Polynomial degree in S_t")->capture_default_str();
  sub->add_option("--seed", o->seed, "Seed (default 42, or the configuration's seed)");
  sub->add_option("--seeds", o->seeds, "Repeat over this many consecutive seeds")->capture_default_str();
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      RunManifest man = make_manifest("markov-test");
      StageClock clk(man);
      if (o->config.empty() && o->toy.empty()) throw ConfigError("markov-test", "one of --config or --toy is required");
      std::optional<Config> cfg;
      if (!o->config.empty()) cfg = load_config_file(o->config);
      const double T = cfg ? cfg->model.horizon : 1.0;
      const double t = o->t > 0 ? o->t : (cfg ? T / 2 : 0.5);
      const double delta = o->delta > 0 ? o->delta : (cfg ? T / 8 : 0.1);
      if (t + delta > T + 1e-12) throw ConfigError("--t", "t + delta must not exceed the horizon");
      const std::uint64_t seed0 = o->seed >= 0 ? static_cast<std::uint64_t>(o->seed) : (cfg ? cfg->disc.seed : 42);
      const fs::path dir = output_dir(g, "markov-test");
      man.config_path = o->config;
      man.seed = seed0;
      man.threads = g.threads;
      man.inputs = {{"source", cfg ? "equilibrium" : o->toy}, {"paths", o->paths}, {"t", t}, {"delta", delta},
                    {"degree", o->degree}, {"seeds", o->seeds},
                    {"instance", cfg ? instance_label(cfg->model) : o->toy}};

      json runs = json::array();
      for (int s = 0; s < o->seeds; ++s) {
        const std::uint64_t seed = seed0 + s;
        MarkovSample sample;
        if (cfg) {
          Config c = *cfg;
          c.disc.seed = seed;
          FbsdeOptions fo;
          fo.threads = g.threads;
          fo.sample_paths = o->paths;
          const EquilibriumSolution sol = solve_fbsde(c.model, c.disc, c.solver, fo);
          const double dt = sol.dt();
          sample = markov_filter_sample(sol.paths, static_cast<int>(std::lround(t / dt)),
                                        std::max(1, static_cast<int>(std::lround(delta / dt))));
        } else if (o->toy == "appendix-sg") {
          sample = markov_toy_sample(o->paths, t, delta, seed);
        } else {
          sample = markov_brownian_sample(o->paths, t, delta, seed);
        }
        const MarkovTestReport r = markov_test(sample.s_t, sample.s_next, sample.aux, o->degree);
        json jr = to_json(r);
        jr["seed"] = seed;
        runs.push_back(jr);
        std::printf("seed %llu: coefficient %+.5f (se %.5f), z %+.2f%s -> %s\n", static_cast<unsigned long long>(seed),
                    r.coefficient, r.se, r.z, r.redundant ? " [auxiliary redundant]" : "", r.verdict.c_str());
      }
      clk.stage("test");
      bool stable = true;
      for (const auto& r : runs) stable = stable && r["verdict"] == runs[0]["verdict"];
      write_json(dir / "markov.json", {{"t", t}, {"delta", delta}, {"runs", runs}, {"stable", stable},
                                       {"source", man.inputs["source"]}, {"instance", man.inputs["instance"]}});
      clk.finish(dir);
      if (o->seeds > 1) std::printf("verdict %s across %d seeds\n", stable ? "stable" : "NOT stable", o->seeds);
      std::printf("report: %s\n", (dir / "markov.json").string().c_str());
      return kExitOk;
    };
  });
}

}  // namespace kylelab::cli
