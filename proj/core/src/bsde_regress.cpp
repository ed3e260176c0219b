#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>

#include "kylelab/bsde.hpp"
#include "kylelab/error.hpp"
#include "kylelab/parallel.hpp"

namespace kylelab {

PolyBasis::PolyBasis(int dim, int degree) : dim_(dim), degree_(dim == 0 ? 0 : degree) {
  if (dim_ == 0) {
    powers_ = {0};
    return;
  }
  // Enumerate exponent tuples by total degree, then lexicographically.
  std::vector<int> e(dim_, 0);
  for (int total = 0; total <= degree_; ++total) {
    std::function<void(int, int)> rec = [&](int c, int left) {
      if (c == dim_ - 1) {
        e[c] = left;
        powers_.insert(powers_.end(), e.begin(), e.end());
        return;
      }
      for (int p = left; p >= 0; --p) {
        e[c] = p;
        rec(c + 1, left - p);
      }
    };
    rec(0, total);
  }
}

void PolyBasis::eval(std::span<const double> s, std::span<double> out) const {
  const int nb = size();
  if (dim_ == 0) {
    out[0] = 1.0;
    return;
  }
  for (int r = 0; r < nb; ++r) {
    double v = 1.0;
    for (int c = 0; c < dim_; ++c)
      for (int p = 0; p < powers_[r * dim_ + c]; ++p) v *= s[c];
    out[r] = v;
  }
}

double RegressionSurface::apply(const std::vector<double>& coef, int k, std::span<const double> x) const {
  const int dim = num_types - 1;
  const PolyBasis& pb = basis[k];
  std::array<double, 8> s{};
  std::array<double, 256> phi{};
  std::vector<double> big;
  std::span<double> ph(phi.data(), phi.size());
  if (pb.size() > static_cast<int>(phi.size())) {
    big.resize(pb.size());
    ph = big;
  }
  std::vector<double> sbig;
  std::span<double> sv(s.data(), s.size());
  if (dim > static_cast<int>(s.size())) {
    sbig.resize(dim);
    sv = sbig;
  }
  if (pb.degree() > 0)
    for (int c = 0; c < dim; ++c) sv[c] = (x[c] - center[k][c]) / scale[k][c];
  pb.eval(sv, ph);
  double v = 0;
  for (int r = 0; r < pb.size(); ++r) v += coef[r] * ph[r];
  return v;
}

double RegressionSurface::continuation_at(int i, int k, std::span<const double> x) const {
  return apply(coef_cont[static_cast<std::size_t>(k) * num_types + i], k, x);
}

double RegressionSurface::z_at(int i, int k, std::span<const double> x) const {
  return apply(coef_z[static_cast<std::size_t>(k) * num_types + i], k, x);
}

namespace {

constexpr std::size_t kChunk = 2048;

struct Moments {
  Eigen::MatrixXd G[2];  // by path parity
  Eigen::MatrixXd R[2];
};

}  // namespace

RegressResult bsde_solve_regress(const MarketModel& m, const Hamiltonian& H, const FilterPaths& f,
                                 const PathBundle& b, int basis_degree, int threads) {
  const int N = m.num_types, K = b.num_steps, dim = N - 1;
  const std::size_t n = static_cast<std::size_t>(b.num_paths);
  if (f.num_paths != b.num_paths || f.num_steps != K) throw DomainError("bsde_solve_regress: filter/bundle mismatch");
  if (basis_degree < 1) throw DomainError("bsde_solve_regress: basis_degree must be at least 1");
  const double dt = b.dt();

  RegressResult res;
  RegressionSurface& surf = res.surface;
  surf.num_types = N;
  surf.num_steps = K;
  surf.horizon = m.horizon;
  surf.center.assign(K, std::vector<double>(dim, 0.0));
  surf.scale.assign(K, std::vector<double>(dim, 1.0));
  surf.degree.assign(K, 0);
  surf.basis.assign(K, PolyBasis(0, 0));
  surf.coef_cont.assign(static_cast<std::size_t>(K) * N, {});
  surf.coef_z.assign(static_cast<std::size_t>(K) * N, {});
  res.Y.assign(n * (K + 1) * N, 0.0);
  res.Z.assign(n * K * N, 0.0);
  res.cv_residual.assign(N, 0.0);
  std::vector<int> cv_steps(N, 0);

  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::map<int, int> reduced;  // degree used -> number of steps
  int constant_steps = 0;

  auto y_at = [&](std::size_t j, int k, int i) -> double& { return res.Y[(j * (K + 1) + k) * N + i]; };

  for (int k = K - 1; k >= 0; --k) {
    // Standardize regressors; a coordinate with no spread forces a constant fit.
    std::vector<double>& mu = surf.center[k];
    std::vector<double>& sd = surf.scale[k];
    bool degenerate = (k == 0) || dim == 0;
    if (!degenerate) {
      std::vector<double> cs(chunks * dim * 2, 0.0);
      parallel_for(chunks, threads, [&](std::size_t c) {
        for (std::size_t j = c * kChunk; j < std::min(n, (c + 1) * kChunk); ++j) {
          auto x = f.x(static_cast<int>(j), k);
          for (int d = 0; d < dim; ++d) {
            cs[(c * dim + d) * 2] += x[d];
            cs[(c * dim + d) * 2 + 1] += x[d] * x[d];
          }
        }
      });
      for (int d = 0; d < dim; ++d) {
        double s1 = 0, s2 = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
          s1 += cs[(c * dim + d) * 2];
          s2 += cs[(c * dim + d) * 2 + 1];
        }
        mu[d] = s1 / n;
        double var = std::max(0.0, s2 / n - mu[d] * mu[d]);
        sd[d] = std::sqrt(var);
        if (!(sd[d] > 1e-10)) degenerate = true;
      }
      if (degenerate) {
        std::fill(sd.begin(), sd.end(), 1.0);
        if (k > 0) ++constant_steps;
      }
    }

    int deg = degenerate ? 0 : basis_degree;
    Eigen::MatrixXd coef;
    Eigen::MatrixXd coef_fold[2];
    for (;;) {
      PolyBasis basis(deg == 0 ? 0 : dim, deg);
      const int nb = basis.size();
      std::vector<Moments> part(chunks);
      parallel_for(chunks, threads, [&](std::size_t c) {
        Moments& mo = part[c];
        for (int p = 0; p < 2; ++p) {
          mo.G[p] = Eigen::MatrixXd::Zero(nb, nb);
          mo.R[p] = Eigen::MatrixXd::Zero(nb, 2 * N);
        }
        std::vector<double> s(std::max(dim, 1)), phi(nb);
        for (std::size_t j = c * kChunk; j < std::min(n, (c + 1) * kChunk); ++j) {
          auto x = f.x(static_cast<int>(j), k);
          for (int d = 0; d < dim; ++d) s[d] = (x[d] - mu[d]) / sd[d];
          basis.eval(s, phi);
          Eigen::Map<const Eigen::VectorXd> ph(phi.data(), nb);
          const int p = static_cast<int>(j & 1);
          mo.G[p].noalias() += ph * ph.transpose();
          const double dB = b.increments(static_cast<int>(j))[k];
          for (int i = 0; i < N; ++i) {
            const double y1 = res.Y[(j * (K + 1) + k + 1) * N + i];
            mo.R[p].col(i) += ph * y1;
            mo.R[p].col(N + i) += ph * (y1 * dB / dt);
          }
        }
      });
      Eigen::MatrixXd G[2] = {Eigen::MatrixXd::Zero(nb, nb), Eigen::MatrixXd::Zero(nb, nb)};
      Eigen::MatrixXd R[2] = {Eigen::MatrixXd::Zero(nb, 2 * N), Eigen::MatrixXd::Zero(nb, 2 * N)};
      for (std::size_t c = 0; c < chunks; ++c)
        for (int p = 0; p < 2; ++p) {
          G[p] += part[c].G[p];
          R[p] += part[c].R[p];
        }
      Eigen::MatrixXd Gall = G[0] + G[1];
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Gall);
      qr.setThreshold(1e-12);
      if (qr.rank() < nb && deg > 0) {
        --deg;
        continue;
      }
      coef = qr.solve(R[0] + R[1]);
      if (deg > 0 && n >= 4) {
        for (int p = 0; p < 2; ++p) {
          Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qf(G[p]);
          coef_fold[p] = qf.solve(R[p]);
        }
      }
      break;
    }
    if (!degenerate && deg < basis_degree) ++reduced[deg];
    surf.degree[k] = deg;
    surf.basis[k] = PolyBasis(deg == 0 ? 0 : dim, deg);
    for (int i = 0; i < N; ++i) {
      surf.coef_cont[static_cast<std::size_t>(k) * N + i].assign(coef.col(i).data(), coef.col(i).data() + coef.rows());
      surf.coef_z[static_cast<std::size_t>(k) * N + i].assign(coef.col(N + i).data(),
                                                              coef.col(N + i).data() + coef.rows());
    }

    // Pathwise update plus out-of-fold residuals of the continuation fit.
    PolyBasis basis(deg == 0 ? 0 : dim, deg);
    const int nb = basis.size();
    const bool do_cv = coef_fold[0].size() > 0;
    std::vector<double> cv_part(chunks * N, 0.0);
    parallel_for(chunks, threads, [&](std::size_t c) {
      std::vector<double> s(std::max(dim, 1)), phi(nb);
      for (std::size_t j = c * kChunk; j < std::min(n, (c + 1) * kChunk); ++j) {
        auto x = f.x(static_cast<int>(j), k);
        for (int d = 0; d < dim; ++d) s[d] = (x[d] - mu[d]) / sd[d];
        basis.eval(s, phi);
        Eigen::Map<const Eigen::VectorXd> ph(phi.data(), nb);
        const double P = f.price(static_cast<int>(j), k);
        for (int i = 0; i < N; ++i) {
          const double cont = ph.dot(coef.col(i));
          const double z = ph.dot(coef.col(N + i));
          res.Z[(j * K + k) * N + i] = z;
          y_at(j, k, i) = cont + dt * H.H(m.values[i] - P + z);
          if (do_cv) {
            const int other = 1 - static_cast<int>(j & 1);
            const double r = res.Y[(j * (K + 1) + k + 1) * N + i] - ph.dot(coef_fold[other].col(i));
            cv_part[c * N + i] += r * r;
          }
        }
      }
    });
    if (do_cv)
      for (int i = 0; i < N; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < chunks; ++c) s += cv_part[c * N + i];
        res.cv_residual[i] += s / n;
        ++cv_steps[i];
      }
  }
  for (int i = 0; i < N; ++i)
    if (cv_steps[i]) res.cv_residual[i] /= cv_steps[i];

  for (const auto& [d, count] : reduced)
    res.warnings.push_back("regression matrix rank-deficient on " + std::to_string(count) +
                           " step(s); basis degree reduced to " + std::to_string(d));
  if (constant_steps)
    res.warnings.push_back("regressors without spread on " + std::to_string(constant_steps) +
                           " step(s); constant fit used");

  // Y_0 and its standard error. Linearizing the driver in Z, the fit at step k
  // regresses Y_{k+1}(1 + s ΔB_k) with s = dH(Ẑ_k); its residual reaches Y_0
  // through the product of those factors over earlier steps. The residuals
  // are martingale increments, so their weighted pathwise sum carries the
  // Monte Carlo error of the whole backward pass.
  res.Y0.assign(N, 0.0);
  res.Y0_se.assign(N, 0.0);
  res.Z0.assign(N, 0.0);
  std::vector<double> q(n);
  for (int i = 0; i < N; ++i) {
    res.Y0[i] = y_at(0, 0, i);
    res.Z0[i] = res.Z[i];
    parallel_for(n, threads, [&](std::size_t j) {
      const auto dB = b.increments(static_cast<int>(j));
      double weight = 1.0, acc = 0.0;
      for (int k = 0; k < K; ++k) {
        const double z = res.Z[(j * K + k) * N + i];
        const double zh = m.values[i] - f.price(static_cast<int>(j), k) + z;
        const double slope = H.dH(zh);
        const double cont = y_at(j, k, i) - dt * H.H(zh);
        const double y1 = res.Y[(j * (K + 1) + k + 1) * N + i];
        acc += weight * (y1 * (1.0 + slope * dB[k]) - cont - slope * z * dt);
        weight *= 1.0 + slope * dB[k];
      }
      q[j] = acc;
    });
    res.Y0_se[i] = sample_mean(q).se;
    for (std::size_t j = 1; j < n; ++j) y_at(j, 0, i) = res.Y0[i];
  }
  return res;
}

}  // namespace kylelab
