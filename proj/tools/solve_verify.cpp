#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include <kylelab/archive.hpp>
#include <kylelab/error.hpp>
#include <kylelab/fbsde.hpp>
#include <kylelab/verify.hpp>

#include "commands.hpp"

namespace kylelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

SolverKind parse_solver(const std::string& s) {
  if (s == "grid") return SolverKind::Grid;
  if (s == "regress") return SolverKind::Regress;
  throw ConfigError("--solver", "expected grid or regress, got '" + s + "'");
}

void print_solution(const EquilibriumSolution& sol) {
  std::printf("solver %s, %d steps, T = %g\n", to_string(sol.solver).c_str(), sol.disc.num_steps, sol.model.horizon);
  std::printf("picard: converged after %zu iterations, last delta %.3e\n", sol.log.deltas.size(),
              sol.log.deltas.empty() ? 0.0 : sol.log.deltas.back());
  for (int i = 0; i < sol.model.num_types; ++i)
    std::printf("  Y0[%d] = %.12f  (v = %g)\n", i + 1, sol.Y0[i], sol.model.values[i]);
  std::printf("final clip events %lld, max sum defect %.2e\n", sol.final_clip_events, sol.max_sum_defect);
}

// zero | const:r1,...,rN | const:r1,...,rN@price
CertifyInputs parse_pair(const MarketModel& m, const std::string& spec) {
  if (spec == "zero") return constant_pair(m, m.mean_value(), std::vector<double>(m.num_types, 0.0));
  if (spec.rfind("const:", 0) == 0) {
    std::string body = spec.substr(6);
    const auto at = body.find('@');
    const std::vector<double> rates = parse_list(body.substr(0, at), "--pair");
    if (static_cast<int>(rates.size()) != m.num_types)
      throw ConfigError("--pair", "expected one rate per type");
    for (double r : rates)
      if (std::abs(r) > m.action_bound) throw ConfigError("--pair", "rate outside the action bound");
    if (at != std::string::npos) return constant_pair(m, parse_list(body.substr(at + 1), "--pair")[0], rates);
    StrategyFn th = constant_strategy(rates);
    return {th, market_price(m), th};
  }
  throw ConfigError("--pair", "expected zero or const:r1,...,rN[@price], got '" + spec + "'");
}

}  // namespace

void add_solve(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("solve", "Solve the equilibrium system by Picard iteration");
  struct Opts {
    std::string config, solver = "grid";
    int sample_paths = 100;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--config", o->config, "Model configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--solver", o->solver, "grid or regress")->capture_default_str();
  sub->add_option("--sample-paths", o->sample_paths, "Equilibrium paths written to paths.csv")->capture_default_str();
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      RunManifest man = make_manifest("solve");
      StageClock clk(man);
      const Config cfg = load_config_file(o->config);
      print_warnings(cfg.warnings);
      FbsdeOptions fo;
      fo.solver = parse_solver(o->solver);
      fo.threads = g.threads;
      const fs::path dir = output_dir(g, "solve");
      man.config_path = o->config;
      man.seed = cfg.disc.seed;
      man.threads = g.threads;
      man.inputs = {{"solver", o->solver}, {"instance", instance_label(cfg.model)}};
      clk.stage("load");
      try {
        const EquilibriumSolution sol = solve_fbsde(cfg.model, cfg.disc, cfg.solver, fo);
        clk.stage("solve");
        write_solution_archive(dir, cfg, sol, o->sample_paths);
        clk.stage("archive");
        clk.finish(dir);
        print_warnings(sol.warnings);
        print_solution(sol);
        std::printf("archive: %s\n", dir.string().c_str());
        return kExitOk;
      } catch (const PicardNonConvergence& e) {
        clk.stage("solve");
        const ContractionReport c = picard_diagnostics(PicardLog{e.deltas(), false});
        write_json(dir / "config.json", to_json(cfg));
        write_json(dir / "picard_log.json",
                   {{"converged", false}, {"deltas", e.deltas()}, {"verdict", c.verdict}, {"tail_ratio", c.tail_ratio}});
        clk.finish(dir);
        std::printf("picard: no convergence after %zu iterations (%s, tail ratio %.3f)\n", e.deltas().size(),
                    c.verdict.c_str(), c.tail_ratio);
        for (std::size_t n = 0; n < e.deltas().size(); ++n) std::printf("  delta[%zu] = %.6e\n", n + 1, e.deltas()[n]);
        std::printf("log: %s\n", (dir / "picard_log.json").string().c_str());
        return kExitNonConvergence;
      }
    };
  });
}

void add_verify(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("verify", "Certify a (price, strategy) pair as an epsilon-equilibrium");
  struct Opts {
    std::string config, solution, pair;
    int paths = -1;
    bool plain = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--config", o->config, "Model configuration (JSON); optional with --solution");
  auto* sol_opt = sub->add_option("--solution", o->solution, "Solution archive written by solve");
  auto* pair_opt = sub->add_option("--pair", o->pair, "zero | const:r1,...,rN[@price]");
  sol_opt->excludes(pair_opt);
  sub->add_option("--paths", o->paths, "Monte Carlo paths (default: discretization.num_paths)");
  sub->add_flag("--no-control-variate", o->plain, "Report the plain strategy-value estimator as primary");
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      RunManifest man = make_manifest("verify");
      StageClock clk(man);
      if (o->solution.empty() && o->pair.empty()) throw ConfigError("verify", "one of --solution or --pair is required");
      Config cfg;
      CertifyInputs pair;
      std::optional<EquilibriumSolution> sol;
      if (!o->solution.empty()) {
        sol = load_solution(o->solution, g.threads, cfg);
        if (!o->config.empty() && dump_config(load_config_file(o->config)) != dump_config(cfg))
          std::cerr << "warning: --config differs from the archived configuration; using the archive\n";
        pair = equilibrium_pair(*sol);
        clk.stage("resolve");
      } else {
        if (o->config.empty()) throw ConfigError("--config", "required with --pair");
        cfg = load_config_file(o->config);
        pair = parse_pair(cfg.model, o->pair);
      }
      print_warnings(cfg.warnings);
      const fs::path dir = output_dir(g, "verify");
      const int paths = o->paths > 0 ? o->paths : cfg.disc.num_paths;
      man.config_path = o->solution.empty() ? o->config : (fs::path(o->solution) / "config.json").string();
      man.seed = cfg.disc.seed;
      man.threads = g.threads;
      man.inputs = {{"pair", o->solution.empty() ? o->pair : "equilibrium"},
                    {"solution", o->solution},
                    {"paths", paths},
                    {"instance", instance_label(cfg.model)}};

      const Hamiltonian H(cfg.model);
      const PathBundle b = gen_paths(paths, cfg.disc.num_steps, cfg.model.horizon, cfg.disc.seed, 0, g.threads);
      clk.stage("paths");
      CertifyOptions co;
      co.grid_resolution = cfg.disc.simplex_grid;
      co.basis_degree = cfg.disc.basis_degree;
      co.control_variate = !o->plain;
      co.threads = g.threads;
      const EpsilonCertificate c = certify(cfg.model, H, pair, b, co);
      clk.stage("certify");
      json j = to_json(c);
      j["instance"] = instance_label(cfg.model);
      write_json(dir / "certificate.json", j);
      clk.finish(dir);

      std::printf("pair %s, %d paths x %d steps (dt = %g)\n", man.inputs["pair"].get<std::string>().c_str(), paths,
                  cfg.disc.num_steps, c.dt);
      std::printf("epsilon1 = %.6e  (se %.2e)\n", c.epsilon1, c.epsilon1_se);
      std::printf("epsilon2 = %.6e  (se %.2e)\n", c.epsilon2, c.epsilon2_se);
      std::printf("epsilon  = %.6e\n", c.epsilon);
      for (std::size_t i = 0; i < c.per_type_gaps.size(); ++i)
        std::printf("  type %zu: sup %.8f  strategy %.8f  gap %.3e (se %.1e)\n", i + 1, c.sup_values[i],
                    c.strategy_values[i], c.per_type_gaps[i], c.gap_se[i]);
      for (const auto& [k, v] : c.verdicts) std::printf("  %s: %s\n", k.c_str(), v ? "yes" : "no");
      std::printf("certificate: %s\n", (dir / "certificate.json").string().c_str());
      return kExitOk;
    };
  });
}

}  // namespace kylelab::cli
