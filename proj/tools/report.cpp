#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include <kylelab/csv.hpp>
#include <kylelab/error.hpp>
#include <kylelab/version.hpp>

#include "commands.hpp"

namespace kylelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Table {
  std::vector<std::string> columns;
  std::vector<json> rows;  // objects keyed by column

  void write_csv(const fs::path& file) const {
    std::ofstream os(file);
    CsvWriter w(os);
    w.header(columns);
    for (const auto& r : rows) {
      for (const auto& c : columns) {
        const json v = r.contains(c) ? r.at(c) : json();
        if (v.is_number())
          w << v.get<double>();
        else if (v.is_string())
          w << v.get<std::string>();
        else if (v.is_boolean())
          w << std::string(v.get<bool>() ? "true" : "false");
        else
          w << std::string();
      }
      w.end_row();
    }
  }

  json to_json() const { return {{"columns", columns}, {"rows", rows}}; }
};

std::vector<std::string> indexed(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

}  // namespace

void add_report(CLI::App& app, const GlobalOptions& g, Action& run) {
  auto* sub = app.add_subcommand("report", "Merge run directories into tables for plotting");
  struct Opts {
    std::vector<std::string> in;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--in", o->in, "Run directories")->expected(0, -1);
  sub->add_flag("--force", o->force, "Accept manifests written by a different tool version");
  sub->callback([&g, &run, o] {
    run = [&g, o] {
      if (o->in.empty()) throw ConfigError("--in", "no run directories given");
      RunManifest man = make_manifest("report");
      StageClock clk(man);

      std::vector<std::pair<fs::path, RunManifest>> runs;
      std::vector<std::string> offending;
      for (const auto& d : o->in) {
        RunManifest m = read_manifest(d);
        const bool schema_ok = m.schema_version == kSchemaVersion;
        const bool version_ok = m.tool_version == kToolVersion || o->force;
        if (!schema_ok || !version_ok)
          offending.push_back((fs::path(d) / "manifest.json").string() + " (tool " + m.tool_version + ", schema " +
                              std::to_string(m.schema_version) + ")");
        runs.emplace_back(d, std::move(m));
      }
      if (!offending.empty()) {
        std::cerr << "error: manifests incompatible with tool " << kToolVersion << " schema " << kSchemaVersion
                  << ":\n";
        for (const auto& f : offending) std::cerr << "  " << f << '\n';
        return kExitUsage;
      }

      std::size_t max_types = 0;
      for (const auto& [dir, m] : runs)
        if (m.subcommand == "solve" && fs::exists(dir / "summary.json"))
          max_types = std::max(max_types, read_json(dir / "summary.json").at("Y0").size());

      Table solve{{"run", "instance", "num_types", "horizon", "num_steps", "dt", "iterations", "converged"}, {}};
      for (const auto& c : indexed("Y0_", max_types)) solve.columns.push_back(c);
      for (const auto& c : indexed("dY0_", max_types)) solve.columns.push_back(c);
      Table verify{{"run", "instance", "dt", "num_paths", "seed", "epsilon1", "epsilon1_se", "epsilon2",
                    "epsilon2_se", "epsilon"}, {}};
      Table bridge{{"run", "R", "num_paths", "eps2", "eps2_se", "eps2_identity", "eta", "eta_se"}, {}};
      Table slopes{{"run", "num_paths", "seed", "levels", "eps2_slope", "eta_slope", "eta_constant"}, {}};
      Table levelset{{"run", "instance", "num_steps", "y", "cost_at_equilibrium_controls", "best_search_value",
                      "verdict"}, {}};
      Table markov{{"run", "source", "seed", "num_paths", "coefficient", "se", "z", "redundant", "verdict"}, {}};

      for (const auto& [dir, m] : runs) {
        const std::string id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
        if (m.subcommand == "solve") {
          if (!fs::exists(dir / "summary.json")) continue;  // non-converged run
          const json s = read_json(dir / "summary.json");
          json r{{"run", id}, {"instance", m.inputs.value("instance", "")}, {"num_types", s["num_types"]},
                 {"horizon", s["horizon"]}, {"num_steps", s["num_steps"]},
                 {"dt", s["horizon"].get<double>() / s["num_steps"].get<double>()},
                 {"iterations", s["picard"]["iterations"]}, {"converged", s["picard"]["converged"]}};
          for (std::size_t i = 0; i < s["Y0"].size(); ++i) r["Y0_" + std::to_string(i + 1)] = s["Y0"][i];
          solve.rows.push_back(r);
        } else if (m.subcommand == "verify") {
          const json c = read_json(dir / "certificate.json");
          verify.rows.push_back({{"run", id}, {"instance", c.value("instance", "")}, {"dt", c["dt"]},
                                 {"num_paths", c["num_paths"]}, {"seed", c["seed"]}, {"epsilon1", c["epsilon1"]},
                                 {"epsilon1_se", c["epsilon1_se"]}, {"epsilon2", c["epsilon2"]},
                                 {"epsilon2_se", c["epsilon2_se"]}, {"epsilon", c["epsilon"]}});
        } else if (m.subcommand == "bridge") {
          const json b = read_json(dir / "rate.json");
          std::string levels;
          for (const auto& r : b["rows"]) {
            bridge.rows.push_back({{"run", id}, {"R", r["R"]}, {"num_paths", b["num_paths"]}, {"eps2", r["eps2"]},
                                   {"eps2_se", r["eps2_se"]}, {"eps2_identity", r["eps2_identity"]},
                                   {"eta", r["eta"]}, {"eta_se", r["eta_se"]}});
            levels += (levels.empty() ? "" : ";") + csv_number(r["R"].get<double>());
          }
          slopes.rows.push_back({{"run", id}, {"num_paths", b["num_paths"]}, {"seed", b["seed"]}, {"levels", levels},
                                 {"eps2_slope", b["eps2_slope"]}, {"eta_slope", b["eta_slope"]},
                                 {"eta_constant", b["eta_constant"]}});
        } else if (m.subcommand == "levelset") {
          const json l = read_json(dir / "levelset.json");
          for (const auto& r : l["rows"]) {
            std::string y;
            for (const auto& c : r["y"]) y += (y.empty() ? "" : ";") + csv_number(c.get<double>());
            levelset.rows.push_back({{"run", id}, {"instance", l.value("instance", "")},
                                     {"num_steps", l.value("num_steps", 0)}, {"y", y},
                                     {"cost_at_equilibrium_controls", r["cost_at_equilibrium_controls"]},
                                     {"best_search_value", r["best_search_value"]}, {"verdict", r["verdict"]}});
          }
        } else if (m.subcommand == "markov-test") {
          const json k = read_json(dir / "markov.json");
          for (const auto& r : k["runs"])
            markov.rows.push_back({{"run", id}, {"source", k["source"]}, {"seed", r["seed"]},
                                   {"num_paths", r["num_paths"]}, {"coefficient", r["coefficient"]},
                                   {"se", r["se"]}, {"z", r["z"]}, {"redundant", r["redundant"]},
                                   {"verdict", r["verdict"]}});
        }
      }

      // Refinement columns: difference to the finest step of the same instance.
      std::map<std::string, const json*> finest;
      for (const auto& r : solve.rows) {
        const std::string key = r["instance"].get<std::string>();
        if (!finest.count(key) || r["num_steps"].get<int>() > (*finest[key])["num_steps"].get<int>()) finest[key] = &r;
      }
      for (auto& r : solve.rows) {
        const json& f = *finest[r["instance"].get<std::string>()];
        for (std::size_t i = 1; i <= max_types; ++i) {
          const std::string c = "Y0_" + std::to_string(i);
          if (r.contains(c) && f.contains(c)) r["dY0_" + std::to_string(i)] = r[c].get<double>() - f[c].get<double>();
        }
      }
      std::sort(solve.rows.begin(), solve.rows.end(), [](const json& a, const json& b) {
        return std::make_pair(a["instance"].get<std::string>(), a["num_steps"].get<int>()) <
               std::make_pair(b["instance"].get<std::string>(), b["num_steps"].get<int>());
      });

      const fs::path dir = output_dir(g, "report");
      json out{{"schema_version", kSchemaVersion}, {"tool_version", kToolVersion}, {"inputs", o->in}};
      for (const auto& [name, t] : std::vector<std::pair<std::string, const Table*>>{
               {"solve", &solve}, {"verify", &verify}, {"bridge", &bridge}, {"bridge_slopes", &slopes},
               {"levelset", &levelset}, {"markov", &markov}}) {
        if (t->rows.empty()) continue;
        t->write_csv(dir / (name + ".csv"));
        out["tables"][name] = t->to_json();
        std::printf("%-14s %zu rows -> %s\n", name.c_str(), t->rows.size(), (dir / (name + ".csv")).string().c_str());
      }
      write_json(dir / "report.json", out);
      man.inputs = {{"in", o->in}, {"force", o->force}};
      man.threads = g.threads;
      clk.finish(dir);
      return kExitOk;
    };
  });
}

}  // namespace kylelab::cli
