#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kylelab/fbsde.hpp"
#include "kylelab/model.hpp"

namespace kylelab {

struct StageTiming {
  std::string name;
  double seconds = 0;
};

// Written into every output directory.
struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::string output_dir;
  std::string tool_version;
  int schema_version = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string started_at;  // UTC, ISO 8601
  double wall_seconds = 0;
  std::vector<StageTiming> stages;
  nlohmann::json inputs;   // subcommand-specific flags

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

RunManifest make_manifest(std::string subcommand);
std::string utc_timestamp();

void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

// config.json, summary.json, value_surface.csv / strategy.csv (N <= 3) and
// paths.csv with the first `sample_paths` equilibrium paths.
void write_solution_archive(const std::filesystem::path& dir, const Config& cfg, const EquilibriumSolution& sol,
                            int sample_paths = 100);

nlohmann::json solution_summary(const EquilibriumSolution& sol);

struct ArchivedSolution {
  Config config;
  SolverKind solver = SolverKind::Grid;
  nlohmann::json summary;
};

// Throws Error when the directory or one of its files is missing.
ArchivedSolution read_solution_archive(const std::filesystem::path& dir);

}  // namespace kylelab
