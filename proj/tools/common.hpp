#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <kylelab/archive.hpp>
#include <kylelab/fbsde.hpp>
#include <kylelab/model.hpp>

namespace kylelab::cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNonConvergence = 2;

struct GlobalOptions {
  int threads = 0;
  std::string out;  // empty: derived from KYLELAB_OUTPUT_ROOT
};

// --out if given, else $KYLELAB_OUTPUT_ROOT (default "runs")/<subcommand>-<UTC stamp>.
std::filesystem::path output_dir(const GlobalOptions& g, const std::string& subcommand);

// Accumulates per-stage wall-clock timings into a manifest.
class StageClock {
 public:
  explicit StageClock(RunManifest& m) : m_(m), start_(clock::now()), stage_(start_) {}
  void stage(const std::string& name);
  void finish(const std::filesystem::path& dir);

 private:
  using clock = std::chrono::steady_clock;
  RunManifest& m_;
  clock::time_point start_, stage_;
};

std::string instance_label(const MarketModel& m);
std::vector<double> parse_list(const std::string& text, const std::string& what);
void print_warnings(const std::vector<std::string>& w);

// Re-solves an archived solution from its stored configuration and checks the
// result against summary.json.
EquilibriumSolution load_solution(const std::string& dir, int threads, Config& cfg, int sample_paths = -1);

}  // namespace kylelab::cli
