#include <Eigen/Dense>

#include <cmath>

#include "kylelab/error.hpp"
#include "kylelab/rng.hpp"
#include "kylelab/verify.hpp"

namespace kylelab {

using nlohmann::json;

json to_json(const MarkovTestReport& r) {
  return json{{"coefficient", r.coefficient}, {"se", r.se},         {"z", r.z},
              {"redundant", r.redundant},     {"verdict", r.verdict}, {"num_paths", r.num_paths},
              {"degree", r.degree}};
}

namespace {

double variance(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  const double mean = s / x.size();
  double s2 = 0;
  for (double v : x) s2 += (v - mean) * (v - mean);
  return s2 / x.size();
}

}  // namespace

MarkovTestReport markov_test(std::span<const double> s_t, std::span<const double> s_next,
                             std::span<const double> aux, int degree, int min_paths) {
  const std::size_t n = s_t.size();
  if (s_next.size() != n || aux.size() != n) throw DomainError("markov_test: input lengths differ");
  if (static_cast<long long>(n) < min_paths)
    throw DomainError("markov_test: needs at least " + std::to_string(min_paths) + " paths");
  if (degree < 1) throw DomainError("markov_test: degree must be at least 1");
  if (!(variance(s_t) > 0)) throw DomainError("markov_test: degenerate regressors (S_t is constant)");
  if (!(variance(aux) > 0)) throw DomainError("markov_test: degenerate regressors (auxiliary is constant)");

  // Centre and scale S so that the polynomial columns stay well conditioned.
  double mu = 0;
  for (double v : s_t) mu += v;
  mu /= n;
  const double sd = std::sqrt(variance(s_t));
  const int p = degree + 2;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = (s_t[j] - mu) / sd;
    double pw = 1.0;
    for (int d = 0; d <= degree; ++d) {
      X(j, d) = pw;
      pw *= s;
    }
    X(j, p - 1) = aux[j];
    y(j) = s_next[j] - s_t[j];
  }

  MarkovTestReport r;
  r.num_paths = static_cast<int>(n);
  r.degree = degree;

  // Is the auxiliary already a function of S in the fitted class?
  Eigen::MatrixXd Xs = X.leftCols(degree + 1);
  Eigen::VectorXd a = X.col(p - 1);
  Eigen::VectorXd fit = Xs * Xs.colPivHouseholderQr().solve(a);
  const double ss_res = (a - fit).squaredNorm();
  const double ss_tot = (a.array() - a.mean()).matrix().squaredNorm();
  if (ss_res <= 1e-12 * ss_tot) {
    r.redundant = true;
    r.verdict = "Markov-consistent";
    return r;
  }

  Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX);
  Eigen::VectorXd beta = ldlt.solve(X.transpose() * y);
  Eigen::VectorXd e = y - X * beta;
  Eigen::MatrixXd meat = X.transpose() * e.array().square().matrix().asDiagonal() * X;
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd cov = inv * meat * inv;
  r.coefficient = beta(p - 1);
  r.se = std::sqrt(cov(p - 1, p - 1));
  r.z = r.se > 0 ? r.coefficient / r.se : 0.0;
  const double az = std::abs(r.z);
  r.verdict = az < 4 ? "Markov-consistent" : (az > 6 ? "non-Markov" : "inconclusive");
  return r;
}

namespace {

constexpr std::uint32_t kToyStream = 0x70F;

// (W_h, ∫_0^h W ds) from two normals: variances h and h³/3, covariance h²/2.
void brownian_and_integral(Substream& rng, double h, double& w, double& iw) {
  const double z1 = rng.normal(), z2 = rng.normal();
  w = std::sqrt(h) * z1;
  iw = 0.5 * h * w + std::sqrt(h * h * h / 12) * z2;
}

}  // namespace

MarkovSample markov_toy_sample(int num_paths, double t, double delta, std::uint64_t seed) {
  if (!(t > 0 && delta > 0)) throw DomainError("markov_toy_sample: t and delta must be positive");
  MarkovSample s;
  s.s_t.resize(num_paths);
  s.s_next.resize(num_paths);
  s.aux.resize(num_paths);
  for (int j = 0; j < num_paths; ++j) {
    Substream rng(seed, kToyStream, static_cast<std::uint64_t>(j));
    double B, A, w, iw;
    brownian_and_integral(rng, t, B, A);
    brownian_and_integral(rng, delta, w, iw);
    const double A_next = A + B * delta + iw, B_next = B + w;
    s.s_t[j] = A + B;
    s.s_next[j] = A_next + B_next;
    s.aux[j] = A;
  }
  return s;
}

MarkovSample markov_brownian_sample(int num_paths, double t, double delta, std::uint64_t seed) {
  if (!(t > 0 && delta > 0)) throw DomainError("markov_brownian_sample: t and delta must be positive");
  MarkovSample s;
  s.s_t.resize(num_paths);
  s.s_next.resize(num_paths);
  s.aux.resize(num_paths);
  for (int j = 0; j < num_paths; ++j) {
    Substream rng(seed, kToyStream + 1, static_cast<std::uint64_t>(j));
    const double B = std::sqrt(t) * rng.normal();
    s.s_t[j] = B;
    s.s_next[j] = B + std::sqrt(delta) * rng.normal();
    s.aux[j] = rng.normal();
  }
  return s;
}

MarkovSample markov_filter_sample(const FilterPaths& f, int k, int lag) {
  if (k < 0 || lag < 1 || k + lag > f.num_steps) throw DomainError("markov_filter_sample: steps out of range");
  MarkovSample s;
  for (int j = 0; j < f.num_paths; ++j) {
    s.s_t.push_back(f.price(j, k));
    s.s_next.push_back(f.price(j, k + lag));
    s.aux.push_back(f.x(j, k)[0]);
  }
  return s;
}

}  // namespace kylelab
