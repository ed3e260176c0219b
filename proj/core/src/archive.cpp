#include "kylelab/archive.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "kylelab/csv.hpp"
#include "kylelab/error.hpp"
#include "kylelab/version.hpp"

namespace kylelab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& file) {
  std::ofstream os(file);
  if (!os) throw Error("cannot write " + file.string());
  return os;
}

std::vector<std::string> numbered(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

void write_tables(const fs::path& dir, const EquilibriumSolution& sol) {
  const int N = sol.model.num_types;
  if (N > 3) return;
  const FeedbackStrategy theta = extract_strategy(sol);
  const SimplexGrid& grid = theta.grid();
  const int K = sol.disc.num_steps;

  {
    std::ofstream os = open_out(dir / "value_surface.csv");
    CsvWriter w(os);
    std::vector<std::string> cols{"step", "t", "node"};
    for (auto v : {numbered("x_", N), numbered("u_", N), numbered("zeta_", N)}) cols.insert(cols.end(), v.begin(), v.end());
    w.header(cols);
    for (int k = 0; k <= K; ++k)
      for (int node = 0; node < grid.num_nodes(); ++node) {
        const auto x = grid.node(node);
        w << k << sol.model.horizon * k / K << node;
        w.values(x);
        for (int i = 0; i < N; ++i) w << sol.value(i, k, x);
        for (int i = 0; i < N; ++i) w << (k < K ? sol.zeta(i, k, x) : 0.0);
        w.end_row();
      }
  }
  {
    std::ofstream os = open_out(dir / "strategy.csv");
    CsvWriter w(os);
    std::vector<std::string> cols{"step", "t", "node"};
    for (auto v : {numbered("x_", N), numbered("theta_", N)}) cols.insert(cols.end(), v.begin(), v.end());
    w.header(cols);
    for (int k = 0; k < theta.num_steps(); ++k)
      for (int node = 0; node < grid.num_nodes(); ++node) {
        w << k << theta.horizon() * k / theta.num_steps() << node;
        w.values(grid.node(node));
        for (int i = 0; i < N; ++i) w << theta.at_node(k, node, i);
        w.end_row();
      }
  }
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest make_manifest(std::string subcommand) {
  RunManifest m;
  m.subcommand = std::move(subcommand);
  m.tool_version = kToolVersion;
  m.schema_version = kSchemaVersion;
  m.started_at = utc_timestamp();
  m.inputs = json::object();
  return m;
}

json RunManifest::to_json() const {
  json st = json::array();
  for (const auto& s : stages) st.push_back({{"name", s.name}, {"seconds", s.seconds}});
  return json{{"subcommand", subcommand}, {"config_path", config_path}, {"output_dir", output_dir},
              {"tool_version", tool_version}, {"schema_version", schema_version}, {"seed", seed},
              {"threads", threads}, {"started_at", started_at}, {"wall_seconds", wall_seconds},
              {"stages", st}, {"inputs", inputs}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config_path = j.value("config_path", "");
    m.output_dir = j.value("output_dir", "");
    m.tool_version = j.at("tool_version").get<std::string>();
    m.schema_version = j.at("schema_version").get<int>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.threads = j.value("threads", 0);
    m.started_at = j.value("started_at", "");
    m.wall_seconds = j.value("wall_seconds", 0.0);
    for (const auto& s : j.value("stages", json::array()))
      m.stages.push_back({s.at("name").get<std::string>(), s.at("seconds").get<double>()});
    m.inputs = j.value("inputs", json::object());
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream os = open_out(file);
  os << j.dump(2) << '\n';
}

json read_json(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot read " + file.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(file.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& dir, const RunManifest& m) { write_json(dir / "manifest.json", m.to_json()); }

RunManifest read_manifest(const fs::path& dir) { return RunManifest::from_json(read_json(dir / "manifest.json")); }

json solution_summary(const EquilibriumSolution& sol) {
  const ContractionReport c = picard_diagnostics(sol.log);
  return json{{"schema_version", kSchemaVersion},
              {"tool_version", kToolVersion},
              {"solver", to_string(sol.solver)},
              {"num_types", sol.model.num_types},
              {"horizon", sol.model.horizon},
              {"num_steps", sol.disc.num_steps},
              {"Y0", sol.Y0},
              {"Y0_se", sol.Y0_se},
              {"picard",
               {{"deltas", sol.log.deltas},
                {"iterations", sol.log.deltas.size()},
                {"converged", sol.log.converged},
                {"verdict", c.verdict},
                {"tail_ratio", c.tail_ratio}}},
              {"flags",
               {{"final_clip_events", sol.final_clip_events},
                {"simplex_preserved", sol.final_clip_events == 0},
                {"max_sum_defect", sol.max_sum_defect},
                {"surface_clip_events", sol.surface ? sol.surface->clip_events : 0}}},
              {"warnings", sol.warnings}};
}

void write_solution_archive(const fs::path& dir, const Config& cfg, const EquilibriumSolution& sol,
                            int sample_paths) {
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));
  write_json(dir / "summary.json", solution_summary(sol));
  write_tables(dir, sol);
  std::ofstream os = open_out(dir / "paths.csv");
  write_paths_csv(os, sol.bundle, sol.paths, sample_paths);
}

ArchivedSolution read_solution_archive(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("solution archive not found: " + dir.string());
  ArchivedSolution a;
  const json cfg = read_json(dir / "config.json");
  a.config = load_config(cfg.dump());
  a.summary = read_json(dir / "summary.json");
  const std::string solver = a.summary.value("solver", "grid");
  if (solver == "grid")
    a.solver = SolverKind::Grid;
  else if (solver == "regress")
    a.solver = SolverKind::Regress;
  else
    throw Error("summary.json: unknown solver '" + solver + "'");
  return a;
}

}  // namespace kylelab
