#include "kylelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kylelab/error.hpp"

namespace kylelab {

using nlohmann::json;

namespace {

constexpr double kPriorTolerance = 1e-12;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path.empty() ? key : path + "." + key, "missing required key");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

long long as_integer(const json& j, const std::string& path) {
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<long long>();
  if (j.is_number_float()) {
    double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  throw ConfigError(path, "expected an integer");
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

CostSpec parse_cost(const json& j, const std::string& path) {
  CostSpec c;
  std::string name;
  const json* params = nullptr;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else if (j.is_object()) {
    name = require(j, "variant", path).get<std::string>();
    params = &j;
  } else {
    throw ConfigError(path, "expected a variant name or an object with \"variant\"");
  }
  if (name == "sqrt_closed_form") {
    c.variant = CostVariant::SqrtClosedForm;
  } else if (name == "quadratic") {
    c.variant = CostVariant::Quadratic;
    if (params && params->contains("lambda")) c.lambda = as_number((*params)["lambda"], path + ".lambda");
    if (!(c.lambda > 0)) throw ConfigError(path + ".lambda", "must be positive");
  } else if (name == "tabulated") {
    c.variant = CostVariant::Tabulated;
    if (!params) throw ConfigError(path, "tabulated cost needs \"theta\" and \"cost\" arrays");
    c.table_theta = as_vector(require(*params, "theta", path), path + ".theta");
    c.table_cost = as_vector(require(*params, "cost", path), path + ".cost");
    if (c.table_theta.size() != c.table_cost.size())
      throw ConfigError(path, "theta and cost arrays differ in length");
  } else {
    throw ConfigError(path + ".variant", "unknown cost variant \"" + name + "\"");
  }
  return c;
}

void validate_cost(const MarketModel& m) {
  const CostSpec& c = m.cost;
  if (c.variant == CostVariant::Quadratic && !(c.lambda > 0))
    throw ConfigError("model.cost.lambda", "must be positive");
  if (c.variant != CostVariant::Tabulated) return;
  const auto& th = c.table_theta;
  if (th.size() < 3) throw ConfigError("model.cost.theta", "tabulated cost needs at least 3 grid points");
  if (th.size() != c.table_cost.size()) throw ConfigError("model.cost", "theta and cost arrays differ in length");
  for (std::size_t k = 1; k < th.size(); ++k)
    if (!(th[k] > th[k - 1])) throw ConfigError("model.cost.theta", "nodes must be strictly increasing");
  if (th.front() != -th.back()) throw ConfigError("model.cost.theta", "table must span a symmetric interval [-a, a]");
  if (std::find(th.begin(), th.end(), 0.0) == th.end())
    throw ConfigError("model.cost.theta", "table must contain theta = 0");
  if (th.back() != m.action_bound)
    throw ConfigError("model.action_bound", "must equal the tabulated range end");
}

}  // namespace

double MarketModel::mean_value() const {
  double s = 0;
  for (int i = 0; i < num_types; ++i) s += prior[i] * values[i];
  return s;
}

double MarketModel::min_value() const { return *std::min_element(values.begin(), values.end()); }
double MarketModel::max_value() const { return *std::max_element(values.begin(), values.end()); }

std::string to_string(CostVariant v) {
  switch (v) {
    case CostVariant::SqrtClosedForm: return "sqrt_closed_form";
    case CostVariant::Quadratic: return "quadratic";
    case CostVariant::Tabulated: return "tabulated";
  }
  return "?";
}

std::string to_string(PicardInit v) {
  switch (v) {
    case PicardInit::Zero: return "zero";
    case PicardInit::PlusBound: return "plus_bound";
    case PicardInit::MinusBound: return "minus_bound";
    case PicardInit::Random: return "random";
  }
  return "?";
}

void validate(const MarketModel& m) {
  if (m.num_types < 1) throw ConfigError("model.num_types", "must be at least 1");
  if (static_cast<int>(m.values.size()) != m.num_types)
    throw ConfigError("model.values", "length must equal num_types");
  if (static_cast<int>(m.prior.size()) != m.num_types)
    throw ConfigError("model.prior", "length must equal num_types");
  for (int i = 0; i < m.num_types; ++i) {
    if (!(m.prior[i] > 0)) throw ConfigError("model.prior[" + std::to_string(i) + "]", "must be positive");
    for (int j = 0; j < i; ++j)
      if (m.values[i] == m.values[j])
        throw ConfigError("model.values[" + std::to_string(i) + "]", "duplicate values");
  }
  double s = 0;
  for (double p : m.prior) s += p;
  if (s != 1.0) throw ConfigError("model.prior", "must sum to exactly 1");
  if (!(m.horizon > 0) || !std::isfinite(m.horizon)) throw ConfigError("model.horizon", "must be positive");
  if (!(m.action_bound > 0)) throw ConfigError("model.action_bound", "must be positive");
  if (m.cost.variant == CostVariant::SqrtClosedForm && m.action_bound != 1.0)
    throw ConfigError("model.action_bound", "sqrt_closed_form cost lives on [-1, 1]");
  validate_cost(m);
}

Config load_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse failure: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "top level must be an object");

  Config cfg;
  const json& jm = require(doc, "model", "");
  MarketModel& m = cfg.model;

  long long n = as_integer(require(jm, "num_types", "model"), "model.num_types");
  if (n < 1) throw ConfigError("model.num_types", "must be at least 1");
  m.num_types = static_cast<int>(n);
  m.values = as_vector(require(jm, "values", "model"), "model.values");
  m.prior = as_vector(require(jm, "prior", "model"), "model.prior");
  m.horizon = as_number(require(jm, "horizon", "model"), "model.horizon");
  if (static_cast<int>(m.values.size()) != m.num_types)
    throw ConfigError("model.values", "length must equal num_types");
  if (static_cast<int>(m.prior.size()) != m.num_types)
    throw ConfigError("model.prior", "length must equal num_types");
  for (int i = 0; i < m.num_types; ++i)
    if (!(m.prior[i] > 0)) throw ConfigError("model.prior[" + std::to_string(i) + "]", "must be positive");
  if (!(m.horizon > 0)) throw ConfigError("model.horizon", "must be positive");

  m.cost = jm.contains("cost") ? parse_cost(jm["cost"], "model.cost") : CostSpec{};
  if (jm.contains("action_bound")) {
    const json& ab = jm["action_bound"];
    if (ab.is_string() && ab.get<std::string>() == "unbounded")
      m.action_bound = std::numeric_limits<double>::infinity();
    else
      m.action_bound = as_number(ab, "model.action_bound");
  } else if (m.cost.variant == CostVariant::Tabulated && !m.cost.table_theta.empty()) {
    m.action_bound = m.cost.table_theta.back();
  } else {
    m.action_bound = 1.0;
  }
  if (m.cost.variant == CostVariant::Quadratic && m.unbounded() == false && !(m.action_bound > 0))
    throw ConfigError("model.action_bound", "must be positive");

  // Normalize the prior so that the sequential sum is exactly one: rescale when
  // the deviation is visible, then close the last entry against the others.
  double s = 0;
  for (double p : m.prior) s += p;
  if (std::abs(s - 1.0) > kPriorTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "model.prior sums to " << s << "; renormalized";
    cfg.warnings.push_back(os.str());
    for (double& p : m.prior) p /= s;
  }
  double head = 0;
  for (int i = 0; i + 1 < m.num_types; ++i) head += m.prior[i];
  m.prior.back() = 1.0 - head;
  if (!(m.prior.back() > 0)) throw ConfigError("model.prior", "normalization left a nonpositive entry");

  if (doc.contains("discretization")) {
    const json& jd = doc["discretization"];
    if (!jd.is_object()) throw ConfigError("discretization", "expected an object");
    Discretization& d = cfg.disc;
    auto int_key = [&](const char* key, int& out, long long lo) {
      if (!jd.contains(key)) return;
      std::string path = std::string("discretization.") + key;
      long long v = as_integer(jd[key], path);
      if (v < lo) throw ConfigError(path, "must be at least " + std::to_string(lo));
      out = static_cast<int>(v);
    };
    int_key("num_steps", d.num_steps, 1);
    int_key("num_paths", d.num_paths, 1);
    int_key("simplex_grid", d.simplex_grid, 2);
    int_key("basis_degree", d.basis_degree, 1);
    if (jd.contains("seed")) {
      const json& js = jd["seed"];
      if (js.is_number_unsigned()) d.seed = js.get<std::uint64_t>();
      else d.seed = static_cast<std::uint64_t>(as_integer(js, "discretization.seed"));
    }
  }

  if (doc.contains("solver")) {
    const json& js = doc["solver"];
    if (!js.is_object()) throw ConfigError("solver", "expected an object");
    SolverSettings& s2 = cfg.solver;
    if (js.contains("picard_tol")) {
      s2.picard_tol = as_number(js["picard_tol"], "solver.picard_tol");
      if (!(s2.picard_tol > 0)) throw ConfigError("solver.picard_tol", "must be positive");
    }
    if (js.contains("picard_max_iter")) {
      long long v = as_integer(js["picard_max_iter"], "solver.picard_max_iter");
      if (v < 1) throw ConfigError("solver.picard_max_iter", "must be at least 1");
      s2.picard_max_iter = static_cast<int>(v);
    }
    if (js.contains("damping")) {
      s2.damping = as_number(js["damping"], "solver.damping");
      if (s2.damping < 0 || s2.damping >= 1) throw ConfigError("solver.damping", "must lie in [0, 1)");
    }
    if (js.contains("explicit_driver")) {
      if (!js["explicit_driver"].is_boolean()) throw ConfigError("solver.explicit_driver", "expected a boolean");
      s2.explicit_driver = js["explicit_driver"].get<bool>();
    }
    if (js.contains("init")) {
      std::string v = js["init"].is_string() ? js["init"].get<std::string>() : "";
      if (v == "zero") s2.init = PicardInit::Zero;
      else if (v == "plus_bound") s2.init = PicardInit::PlusBound;
      else if (v == "minus_bound") s2.init = PicardInit::MinusBound;
      else if (v == "random") s2.init = PicardInit::Random;
      else throw ConfigError("solver.init", "expected zero, plus_bound, minus_bound or random");
    }
    if (js.contains("init_seed"))
      s2.init_seed = static_cast<std::uint64_t>(as_integer(js["init_seed"], "solver.init_seed"));
  }

  validate(m);
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

json to_json(const Config& cfg) {
  const MarketModel& m = cfg.model;
  json cost;
  cost["variant"] = to_string(m.cost.variant);
  if (m.cost.variant == CostVariant::Quadratic) cost["lambda"] = m.cost.lambda;
  if (m.cost.variant == CostVariant::Tabulated) {
    cost["theta"] = m.cost.table_theta;
    cost["cost"] = m.cost.table_cost;
  }
  json jm = {{"num_types", m.num_types}, {"values", m.values}, {"prior", m.prior},
             {"horizon", m.horizon}, {"cost", cost}};
  if (m.unbounded()) jm["action_bound"] = "unbounded";
  else jm["action_bound"] = m.action_bound;

  const Discretization& d = cfg.disc;
  json jd = {{"num_steps", d.num_steps}, {"num_paths", d.num_paths}, {"simplex_grid", d.simplex_grid},
             {"seed", d.seed}, {"basis_degree", d.basis_degree}};
  const SolverSettings& s = cfg.solver;
  json js = {{"picard_tol", s.picard_tol}, {"picard_max_iter", s.picard_max_iter}, {"damping", s.damping},
             {"init", to_string(s.init)}, {"init_seed", s.init_seed}, {"explicit_driver", s.explicit_driver}};
  return json{{"model", jm}, {"discretization", jd}, {"solver", js}};
}

std::string dump_config(const Config& cfg) { return to_json(cfg).dump(2); }

}  // namespace kylelab
