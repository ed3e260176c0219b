#include "kylelab/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kylelab/csv.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"
#include "kylelab/quadrature.hpp"
#include "kylelab/rng.hpp"

namespace kylelab {

namespace {

constexpr std::uint32_t kBridgeStream = 0xB71D;

void check_level(double R) {
  if (!(R > 1)) throw DomainError("bridge: truncation level R must exceed 1");
}

int geometric_steps(double R, int steps_per_unit) {
  return std::max(1, static_cast<int>(std::ceil(steps_per_unit * std::log(R) - 1e-9)));
}

// First index k <= last with |q_k| >= R, else last.
template <class Q>
int hitting_index(int last, double R, Q&& q) {
  for (int k = 0; k < last; ++k)
    if (std::abs(q(k)) >= R) return k;
  return last;
}

}  // namespace

double bridge_strategy(double v, double t, double q) {
  if (!(t < 1)) throw DomainError("bridge_strategy: t must be below 1");
  return (v - q) / (1 - t);
}

double bridge_value(double v) { return 0.5 * (v * v + 1); }

std::vector<double> geometric_grid(double t_max, int num_steps) {
  if (!(t_max > 0 && t_max < 1)) throw DomainError("geometric_grid: t_max must lie in (0, 1)");
  if (num_steps < 1) throw DomainError("geometric_grid: need at least one step");
  std::vector<double> t(num_steps + 1);
  const double L = std::log1p(-t_max);
  for (int k = 0; k <= num_steps; ++k) t[k] = -std::expm1(L * k / num_steps);
  t[num_steps] = t_max;
  return t;
}

std::vector<double> uniform_grid(double t_max, int num_steps) {
  if (!(t_max > 0 && t_max <= 1)) throw DomainError("uniform_grid: t_max must lie in (0, 1]");
  if (num_steps < 1) throw DomainError("uniform_grid: need at least one step");
  std::vector<double> t(num_steps + 1);
  for (int k = 0; k <= num_steps; ++k) t[k] = t_max * k / num_steps;
  t[num_steps] = t_max;
  return t;
}

BridgeGenerator::BridgeGenerator(std::vector<double> times, std::uint64_t seed, BridgeIntegral mode)
    : times_(std::move(times)), seed_(seed), mode_(mode) {
  if (times_.size() < 2 || times_[0] != 0.0) throw DomainError("BridgeGenerator: grid must start at 0");
  const std::size_t K = times_.size() - 1;
  slope_.assign(K, 0.0);
  resid_sd_.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double a = times_[k], b = times_[k + 1];
    if (!(b > a)) throw DomainError("BridgeGenerator: grid must be increasing");
    if (b >= 1) continue;  // I diverges at t = 1; only B is extended there
    if (mode_ == BridgeIntegral::LeftPoint) {
      slope_[k] = 1 / (1 - a);
    } else {
      const double h = b - a;
      const double var_i = 1 / (1 - b) - 1 / (1 - a);
      const double cov = std::log((1 - a) / (1 - b));
      slope_[k] = cov / h;
      resid_sd_[k] = std::sqrt(std::max(0.0, var_i - cov * cov / h));
    }
  }
}

void BridgeGenerator::path(std::uint64_t j, std::span<double> B, std::span<double> I) const {
  Substream rng(seed_, kBridgeStream, j);
  const std::size_t K = times_.size() - 1;
  B[0] = 0;
  I[0] = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double z1 = rng.normal(), z2 = rng.normal();
    const double dB = std::sqrt(times_[k + 1] - times_[k]) * z1;
    B[k + 1] = B[k] + dB;
    I[k + 1] = times_[k + 1] >= 1 ? std::numeric_limits<double>::quiet_NaN()
                                  : I[k] + slope_[k] * dB + resid_sd_[k] * z2;
  }
}

BridgePaths simulate_bridge(const std::vector<double>& times, int num_paths, std::uint64_t seed,
                            BridgeIntegral mode, int threads) {
  if (!times.empty() && !(times.back() < 1)) throw DomainError("simulate_bridge: t_max must be below 1");
  BridgeGenerator gen(times, seed, mode);
  BridgePaths out;
  out.times = times;
  out.num_paths = num_paths;
  const std::size_t stride = times.size();
  out.B.resize(stride * num_paths);
  out.I.resize(stride * num_paths);
  parallel_for(static_cast<std::size_t>(num_paths), threads, [&](std::size_t j) {
    gen.path(j, {out.B.data() + j * stride, stride}, {out.I.data() + j * stride, stride});
  });
  return out;
}

double bridge_ode_defect(const BridgePaths& paths, int j, double v) {
  double integral = 0, worst = 0;
  for (int k = 1; k <= paths.num_steps(); ++k) {
    const double h = paths.times[k] - paths.times[k - 1];
    integral += 0.5 * h * (paths.theta_hat(j, k - 1, v) + paths.theta_hat(j, k, v));
    worst = std::max(worst, std::abs(paths.q(j, k, v) - integral - paths.b(j, k)));
  }
  return worst;
}

BridgeValueCheck bridge_value_check(double v, double R, const BridgeRunOptions& opt) {
  check_level(R);
  const int K = geometric_steps(R, opt.steps_per_unit);
  BridgeGenerator gen(geometric_grid(1 - 1 / R, K), opt.seed, opt.integral);
  const auto& t = gen.times();
  const std::size_t n = static_cast<std::size_t>(opt.num_paths);
  std::vector<double> running(n), terminal(n), hit(n);
  parallel_for(n, opt.threads, [&](std::size_t j) {
    std::vector<double> B(K + 1), I(K + 1);
    gen.path(j, B, I);
    auto q = [&](int k) { return v * t[k] + (1 - t[k]) * I[k]; };
    const int kt = hitting_index(K, R, q);
    double acc = 0;
    for (int k = 1; k <= kt; ++k) {
      const double g0 = (1 - t[k - 1]) * (v - I[k - 1]) * (v - I[k - 1]);
      const double g1 = (1 - t[k]) * (v - I[k]) * (v - I[k]);
      acc += 0.5 * (t[k] - t[k - 1]) * (g0 + g1);
    }
    const double qt = q(kt), rest = 1 - t[kt];
    running[j] = acc + 0.5 * (v - qt) * (v - qt) + 0.5 * rest;
    terminal[j] = v * qt - 0.5 * (qt * qt + rest - 1);
    hit[j] = kt < K ? 1.0 : 0.0;
  });
  BridgeValueCheck out;
  out.v = v;
  out.closed_form = bridge_value(v);
  out.running = sample_mean(running);
  out.terminal = sample_mean(terminal);
  out.hit_fraction = sample_mean(hit).mean;
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

RateReport truncation_rate(const std::vector<double>& R_list, const BridgeRunOptions& opt) {
  if (R_list.size() < 3) throw DomainError("truncation_rate: need at least three truncation levels");
  for (double R : R_list) check_level(R);
  const Quadrature gh = gauss_hermite(opt.quadrature_nodes);
  RateReport rep;
  rep.num_paths = opt.num_paths;
  rep.seed = opt.seed;
  rep.quadrature_nodes = opt.quadrature_nodes;
  const std::size_t n = static_cast<std::size_t>(opt.num_paths);

  for (double R : R_list) {
    const int Kg = geometric_steps(R, opt.steps_per_unit);
    std::vector<double> t = geometric_grid(1 - 1 / R, Kg);
    for (int s = 1; s <= opt.tail_steps; ++s) t.push_back(1 - 1 / R + (1 / R) * s / opt.tail_steps);
    t.back() = 1.0;
    BridgeGenerator gen(t, opt.seed, opt.integral);
    const int K = static_cast<int>(t.size()) - 1;

    std::vector<double> direct(n), ident(n), eta(n), hit(n);
    parallel_for(n, opt.threads, [&](std::size_t j) {
      std::vector<double> B(K + 1), I(K + 1);
      gen.path(j, B, I);
      // Reference measure: Q = B and the frozen price is B_{τ∧t}.
      const int kb = hitting_index(Kg, R, [&](int k) { return B[k]; });
      double d = 0;
      for (int k = kb + 1; k <= K; ++k) {
        const double a = B[k - 1] - B[kb], b = B[k] - B[kb];
        d += 0.5 * (t[k] - t[k - 1]) * (a * a + b * b);
      }
      direct[j] = d;
      ident[j] = 0.5 * (1 - t[kb]) * (1 - t[kb]);
      hit[j] = kb < Kg ? 1.0 : 0.0;
      // Insider's measure for each v: Q^v is the bridge until it hits ±R,
      // then a Brownian motion, so E|Q_1 - v|² given F_τ is (Q_τ - v)² + 1 - τ.
      double g = 0;
      for (std::size_t a = 0; a < gh.nodes.size(); ++a) {
        const double v = gh.nodes[a];
        auto q = [&](int k) { return v * t[k] + (1 - t[k]) * I[k]; };
        const int kt = hitting_index(Kg, R, q);
        const double gap = q(kt) - v;
        g += gh.weights[a] * 0.5 * (gap * gap + 1 - t[kt]);
      }
      eta[j] = g;
    });

    RateRow row;
    row.R = R;
    row.num_steps = K;
    const Estimate d = sample_mean(direct), id = sample_mean(ident), e = sample_mean(eta);
    row.eps2_sq = d.mean;
    row.eps2_sq_se = d.se;
    row.eps2 = std::sqrt(std::max(0.0, d.mean));
    row.eps2_se = row.eps2 > 0 ? d.se / (2 * row.eps2) : 0.0;
    row.eps2_identity_sq = id.mean;
    row.eps2_identity_sq_se = id.se;
    row.eps2_identity = std::sqrt(id.mean);
    row.estimators_agree = std::abs(d.mean - id.mean) <= 3 * std::hypot(d.se, id.se);
    row.eta = e.mean;
    row.eta_se = e.se;
    row.hit_fraction = sample_mean(hit).mean;
    rep.rows.push_back(row);
  }

  std::vector<double> Rs, e2, et;
  for (const auto& r : rep.rows) {
    Rs.push_back(r.R);
    e2.push_back(r.eps2);
    et.push_back(r.eta);
    rep.eta_constant = std::max(rep.eta_constant, r.eta * std::sqrt(r.R));
  }
  rep.eps2_slope = loglog_slope(Rs, e2);
  rep.eta_slope = loglog_slope(Rs, et);
  return rep;
}

nlohmann::json RateReport::to_json() const {
  nlohmann::json j;
  j["num_paths"] = num_paths;
  j["seed"] = seed;
  j["quadrature_nodes"] = quadrature_nodes;
  j["eps2_slope"] = eps2_slope;
  j["eta_slope"] = eta_slope;
  j["eta_constant"] = eta_constant;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"R", r.R},
                         {"eps2", r.eps2},
                         {"eps2_se", r.eps2_se},
                         {"eps2_identity", r.eps2_identity},
                         {"eps2_sq_direct", r.eps2_sq},
                         {"eps2_sq_direct_se", r.eps2_sq_se},
                         {"eps2_sq_identity", r.eps2_identity_sq},
                         {"eps2_sq_identity_se", r.eps2_identity_sq_se},
                         {"estimators_agree", r.estimators_agree},
                         {"eta", r.eta},
                         {"eta_se", r.eta_se},
                         {"epsilon", r.epsilon()},
                         {"hit_fraction", r.hit_fraction},
                         {"num_steps", r.num_steps}});
  }
  return j;
}

void RateReport::write_csv(std::ostream& os) const {
  CsvWriter w(os);
  w.header({"R", "eps2", "eps2_se", "eps2_identity", "eta", "eta_se"});
  for (const auto& r : rows) {
    w << r.R << r.eps2 << r.eps2_se << r.eps2_identity << r.eta << r.eta_se;
    w.end_row();
  }
}

std::vector<FixedPointRow> gaussian_fixed_point_check(const std::vector<double>& t_list,
                                                      const FixedPointOptions& opt) {
  check_level(opt.R);
  if (t_list.empty()) return {};
  const double t_cap = 1 - 1 / opt.R;
  double t_last = 0;
  for (double t : t_list) {
    if (!(t > 0 && t <= t_cap + 1e-12))
      throw DomainError("gaussian_fixed_point_check: times must lie in (0, 1 - 1/R]");
    t_last = std::max(t_last, t);
  }
  const int K = std::max(1, static_cast<int>(std::lround(t_last / opt.dt)));
  const double dt = t_last / K;
  std::vector<int> index;
  for (double t : t_list) index.push_back(static_cast<int>(std::lround(t / dt)));

  const Quadrature gh = gauss_hermite(opt.quadrature_nodes);
  std::vector<double> log_w(gh.weights.size());
  for (std::size_t a = 0; a < log_w.size(); ++a) log_w[a] = std::log(gh.weights[a]);

  const std::size_t n = static_cast<std::size_t>(opt.num_paths);
  const std::size_t m = t_list.size();
  std::vector<double> defect(n * m);
  parallel_for(n, opt.threads, [&](std::size_t j) {
    Substream rng(opt.seed, kBridgeStream + 1, j);
    const double sq = std::sqrt(dt);
    double B = 0, A1 = 0, A2 = 0, B_frozen = 0;
    bool stopped = false;
    std::vector<double> mv(gh.nodes.size());
    auto evaluate = [&](std::size_t slot) {
      const double price = stopped ? B_frozen : B;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mv.size(); ++a) {
        const double v = gh.nodes[a];
        mv[a] = log_w[a] + v * A1 - 0.5 * v * v * A2;
        mx = std::max(mx, mv[a]);
      }
      double num = 0, den = 0, absden = 0;
      for (std::size_t a = 0; a < mv.size(); ++a) {
        const double e = std::exp(mv[a] - mx), v = gh.nodes[a];
        num += e * v;
        den += e;
        absden += e * std::abs(v);
      }
      defect[j * m + slot] = std::abs(num - price * den) / absden;
    };
    for (int k = 0; k <= K; ++k) {
      if (!stopped && !opt.zero_strategy && (std::abs(B) >= opt.R || k * dt >= t_cap)) {
        stopped = true;
        B_frozen = B;
      }
      for (std::size_t s = 0; s < m; ++s)
        if (index[s] == k) evaluate(s);
      if (k == K) break;
      const double dB = sq * rng.normal();
      if (!stopped && !opt.zero_strategy) {
        // log M^v = v A1 - ½ v² A2 + terms free of v, with θ = w (v - B).
        const double w = 1 / (1 - k * dt);
        A1 += w * dB + w * w * B * dt;
        A2 += w * w * dt;
      }
      B += dB;
    }
  });

  std::vector<FixedPointRow> rows(m);
  for (std::size_t s = 0; s < m; ++s) {
    auto& row = rows[s];
    row.t = t_list[s];
    row.defects.resize(n);
    std::size_t below = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row.defects[j] = defect[j * m + s];
      if (row.defects[j] < opt.threshold) ++below;
    }
    row.fraction_below = static_cast<double>(below) / n;
    std::vector<double> sorted = row.defects;
    std::sort(sorted.begin(), sorted.end());
    row.median = sorted[n / 2];
    row.p99 = sorted[std::min(n - 1, static_cast<std::size_t>(0.99 * n))];
    row.max = sorted.back();
  }
  return rows;
}

}  // namespace kylelab
