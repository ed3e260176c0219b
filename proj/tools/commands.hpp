#pragma once

#include <functional>

#include "common.hpp"

namespace CLI {
class App;
}

namespace kylelab::cli {

// Each adds its subcommand to app; when the subcommand is selected, the
// parsed action is stored in `run`.
using Action = std::function<int()>;

void add_solve(CLI::App& app, const GlobalOptions& g, Action& run);
void add_verify(CLI::App& app, const GlobalOptions& g, Action& run);
void add_bridge(CLI::App& app, const GlobalOptions& g, Action& run);
void add_levelset(CLI::App& app, const GlobalOptions& g, Action& run);
void add_markov_test(CLI::App& app, const GlobalOptions& g, Action& run);
void add_report(CLI::App& app, const GlobalOptions& g, Action& run);

}  // namespace kylelab::cli
