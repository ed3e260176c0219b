#include <iostream>

#include <CLI11.hpp>

#include <kylelab/error.hpp>
#include <kylelab/version.hpp>

#include "commands.hpp"

using namespace kylelab;

int main(int argc, char** argv) {
  CLI::App app{"Kyle-Back insider equilibrium lab"};
  app.set_version_flag("--version", std::string("kylelab ") + kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  cli::GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker threads, 0 = one per hardware thread")->capture_default_str();
  app.add_option("--out", g.out, "Output directory (default: $KYLELAB_OUTPUT_ROOT/<subcommand>-<time>)");

  cli::Action run;
  cli::add_solve(app, g, run);
  cli::add_verify(app, g, run);
  cli::add_bridge(app, g, run);
  cli::add_levelset(app, g, run);
  cli::add_markov_test(app, g, run);
  cli::add_report(app, g, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    return run ? run() : cli::kExitUsage;
  } catch (const PicardNonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  }
}
