#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kylelab {

enum class CostVariant { SqrtClosedForm, Quadratic, Tabulated };

struct CostSpec {
  CostVariant variant = CostVariant::SqrtClosedForm;
  double lambda = 1.0;               // quadratic: f(θ) = λθ²/2
  std::vector<double> table_theta;   // tabulated: increasing θ nodes spanning [-a, a]
  std::vector<double> table_cost;    // tabulated: f at the nodes
};

struct MarketModel {
  int num_types = 0;
  std::vector<double> values;
  std::vector<double> prior;
  double horizon = 1.0;
  CostSpec cost;
  // Half-width a of the action interval [-a, a]; +inf when unbounded.
  double action_bound = 1.0;

  bool unbounded() const { return action_bound == std::numeric_limits<double>::infinity(); }
  double mean_value() const;
  double min_value() const;
  double max_value() const;
};

struct Discretization {
  int num_steps = 64;
  int num_paths = 10000;
  int simplex_grid = 201;
  std::uint64_t seed = 42;
  int basis_degree = 3;

  double dt(double horizon) const { return horizon / num_steps; }
};

enum class PicardInit { Zero, PlusBound, MinusBound, Random };

struct SolverSettings {
  double picard_tol = 1e-8;
  int picard_max_iter = 60;
  double damping = 0.0;  // θ ← (1-damping)·θ_new + damping·θ_old
  PicardInit init = PicardInit::Zero;
  std::uint64_t init_seed = 0;  // used by PicardInit::Random
  bool explicit_driver = false;
};

struct Config {
  MarketModel model;
  Discretization disc;
  SolverSettings solver;
  std::vector<std::string> warnings;
};

// Parse and validate a JSON configuration document. Throws ConfigError.
Config load_config(const std::string& text);
Config load_config_file(const std::string& path);

nlohmann::json to_json(const Config& cfg);
std::string dump_config(const Config& cfg);

// Checks every MarketModel invariant; throws ConfigError naming the field.
void validate(const MarketModel& m);

std::string to_string(CostVariant v);
std::string to_string(PicardInit v);

}  // namespace kylelab
