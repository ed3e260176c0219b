#include "common.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <kylelab/csv.hpp>
#include <kylelab/error.hpp>

namespace kylelab::cli {

namespace fs = std::filesystem;

fs::path output_dir(const GlobalOptions& g, const std::string& subcommand) {
  fs::path dir;
  if (!g.out.empty()) {
    dir = g.out;
  } else {
    const char* root = std::getenv("KYLELAB_OUTPUT_ROOT");
    std::string stamp = utc_timestamp();
    std::erase(stamp, ':');
    std::erase(stamp, '-');
    dir = fs::path(root && *root ? root : "runs") / (subcommand + "-" + stamp);
  }
  fs::create_directories(dir);
  return dir;
}

void StageClock::stage(const std::string& name) {
  const auto now = clock::now();
  m_.stages.push_back({name, std::chrono::duration<double>(now - stage_).count()});
  stage_ = now;
}

void StageClock::finish(const fs::path& dir) {
  m_.wall_seconds = std::chrono::duration<double>(clock::now() - start_).count();
  m_.output_dir = dir.string();
  write_manifest(dir, m_);
}

std::string instance_label(const MarketModel& m) {
  std::ostringstream os;
  os << "N" << m.num_types << "-T" << csv_number(m.horizon) << "-" << to_string(m.cost.variant);
  return os.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what, "cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(what, "empty list");
  return out;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

EquilibriumSolution load_solution(const std::string& dir, int threads, Config& cfg, int sample_paths) {
  const ArchivedSolution arch = read_solution_archive(dir);
  cfg = arch.config;
  FbsdeOptions fo;
  fo.solver = arch.solver;
  fo.threads = threads;
  fo.sample_paths = sample_paths;
  EquilibriumSolution sol = solve_fbsde(cfg.model, cfg.disc, cfg.solver, fo);
  if (nlohmann::json(sol.Y0) != arch.summary.at("Y0"))
    throw Error("re-solved Y0 does not match " + (fs::path(dir) / "summary.json").string());
  return sol;
}

}  // namespace kylelab::cli
