#pragma once

// Reference implementations used only by the tests. Everything here favors
// directness over speed: dense joint-Gaussian conditioning instead of
// filtering, explicit path enumeration instead of message passing, brute
// quadrature instead of closed forms. None of it shares code with the
// library recursions it checks.

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "msdbn/model.hpp"
#include "msdbn/rng.hpp"

namespace oracle {

using msdbn::Mat;
using msdbn::ModelParams;
using msdbn::Rng;
using msdbn::SequenceData;
using msdbn::Vec;

inline double log_gaussian_dense(const Vec& x, const Vec& mean,
                                 const Mat& cov) {
  const int n = static_cast<int>(x.size());
  Vec d = x - mean;
  return -0.5 * (d.dot(cov.inverse() * d) + std::log(cov.determinant()) +
                 n * std::log(2.0 * std::numbers::pi));
}

// --- Dense LDS posterior -----------------------------------------------------

struct DenseLdsPosterior {
  std::vector<Vec> means;
  std::vector<Mat> covs;
  std::vector<Mat> cross_covs;  // Cov(x_t, x_{t-1}), index t-1
  double log_evidence = 0.0;
};

// Builds the joint Gaussian of (x_0..x_{T-1}, y_0..y_{T-1}) for fixed inputs
// u and conditions on y in one dense solve.
inline DenseLdsPosterior dense_lds_posterior(const ModelParams& p,
                                             const SequenceData& y,
                                             const std::vector<Vec>& u) {
  const int T = y.length();
  const int n = p.state_dim;
  const int m = p.obs_dim;

  std::vector<Vec> mu(T);
  std::vector<Mat> var(T);
  mu[0] = u[0];
  var[0] = p.Q;
  for (int t = 1; t < T; ++t) {
    mu[t] = p.A * mu[t - 1] + u[t];
    var[t] = p.A * var[t - 1] * p.A.transpose() + p.Q;
  }

  // Cov(x_{t2}, x_t) = A^{t2-t} Var(x_t) for t2 >= t
  Mat sigma_x(T * n, T * n);
  for (int t = 0; t < T; ++t) {
    sigma_x.block(t * n, t * n, n, n) = var[t];
    Mat lift = Mat::Identity(n, n);
    for (int t2 = t + 1; t2 < T; ++t2) {
      lift = p.A * lift;
      Mat c = lift * var[t];
      sigma_x.block(t2 * n, t * n, n, n) = c;
      sigma_x.block(t * n, t2 * n, n, n) = c.transpose();
    }
  }

  Mat c_big = Mat::Zero(T * m, T * n);
  Mat r_big = Mat::Zero(T * m, T * m);
  Vec mu_x(T * n), y_all(T * m);
  for (int t = 0; t < T; ++t) {
    c_big.block(t * m, t * n, m, n) = p.C;
    r_big.block(t * m, t * m, m, m) = p.R;
    mu_x.segment(t * n, n) = mu[t];
    y_all.segment(t * m, m) = y.y[t];
  }

  Mat sigma_xy = sigma_x * c_big.transpose();
  Mat sigma_y = c_big * sigma_x * c_big.transpose() + r_big;
  Mat sigma_y_inv = sigma_y.inverse();
  Vec innov = y_all - c_big * mu_x;

  Vec post_mean = mu_x + sigma_xy * sigma_y_inv * innov;
  Mat post_cov = sigma_x - sigma_xy * sigma_y_inv * sigma_xy.transpose();

  DenseLdsPosterior out;
  out.log_evidence = log_gaussian_dense(y_all, c_big * mu_x, sigma_y);
  for (int t = 0; t < T; ++t) {
    out.means.push_back(post_mean.segment(t * n, n));
    out.covs.push_back(post_cov.block(t * n, t * n, n, n));
    if (t > 0)
      out.cross_covs.push_back(post_cov.block(t * n, (t - 1) * n, n, n));
  }
  return out;
}

// --- HMM by enumeration -------------------------------------------------------

struct EnumeratedHmm {
  std::vector<Vec> gammas;
  std::vector<Mat> xis;
  double log_evidence = 0.0;
};

inline EnumeratedHmm enumerate_hmm(const Mat& Pi, const Vec& pi0,
                                   const std::vector<Vec>& log_evidence) {
  const int T = static_cast<int>(log_evidence.size());
  const int s = static_cast<int>(pi0.size());
  long count = 1;
  for (int t = 0; t < T; ++t) count *= s;

  std::vector<std::vector<int>> paths;
  std::vector<double> log_w;
  double best = -std::numeric_limits<double>::infinity();
  for (long p = 0; p < count; ++p) {
    std::vector<int> path(T);
    long rest = p;
    for (int t = T - 1; t >= 0; --t) {
      path[t] = static_cast<int>(rest % s);
      rest /= s;
    }
    double lw = std::log(pi0(path[0])) + log_evidence[0](path[0]);
    for (int t = 1; t < T; ++t)
      lw += std::log(Pi(path[t], path[t - 1])) + log_evidence[t](path[t]);
    best = std::max(best, lw);
    paths.push_back(std::move(path));
    log_w.push_back(lw);
  }

  double z = 0.0;
  for (double lw : log_w) z += std::exp(lw - best);
  EnumeratedHmm out;
  out.log_evidence = best + std::log(z);
  out.gammas.assign(T, Vec::Zero(s));
  out.xis.assign(T - 1, Mat::Zero(s, s));
  for (std::size_t p = 0; p < paths.size(); ++p) {
    double w = std::exp(log_w[p] - out.log_evidence);
    for (int t = 0; t < T; ++t) {
      out.gammas[t](paths[p][t]) += w;
      if (t > 0) out.xis[t - 1](paths[p][t], paths[p][t - 1]) += w;
    }
  }
  return out;
}

// Best path and its log score by enumeration; ties resolved toward the
// lexicographically smaller path.
inline std::pair<std::vector<int>, double> enumerate_viterbi(
    const Mat& Pi, const Vec& pi0, const std::vector<Vec>& log_evidence) {
  const int T = static_cast<int>(log_evidence.size());
  const int s = static_cast<int>(pi0.size());
  long count = 1;
  for (int t = 0; t < T; ++t) count *= s;

  std::vector<int> best_path;
  double best = -std::numeric_limits<double>::infinity();
  for (long p = 0; p < count; ++p) {
    std::vector<int> path(T);
    long rest = p;
    for (int t = T - 1; t >= 0; --t) {
      path[t] = static_cast<int>(rest % s);
      rest /= s;
    }
    double lw = std::log(pi0(path[0])) + log_evidence[0](path[0]);
    for (int t = 1; t < T; ++t)
      lw += std::log(Pi(path[t], path[t - 1])) + log_evidence[t](path[t]);
    if (lw > best) {  // strict keeps the first (lexicographically smallest)
      best = lw;
      best_path = path;
    }
  }
  return {best_path, best};
}

// --- Quadrature ---------------------------------------------------------------

// p(y_0, y_1) for a scalar model (N = M = 1) with fixed inputs, by trapezoid
// quadrature over (x_0, x_1) on [-span, span]^2.
inline double quadrature_evidence_t2(const ModelParams& p,
                                     const SequenceData& y,
                                     const std::vector<Vec>& u, double span,
                                     int cells) {
  const double q = p.Q(0, 0), r = p.R(0, 0), a = p.A(0, 0), c = p.C(0, 0);
  auto normal = [](double x, double mean, double var) {
    double d = x - mean;
    return std::exp(-0.5 * d * d / var) /
           std::sqrt(2.0 * std::numbers::pi * var);
  };
  const double h = 2.0 * span / cells;
  double total = 0.0;
  for (int i = 0; i <= cells; ++i) {
    double x0 = -span + i * h;
    double wi = (i == 0 || i == cells) ? 0.5 : 1.0;
    double f0 = normal(x0, u[0](0), q) * normal(y.y[0](0), c * x0, r);
    double inner = 0.0;
    for (int j = 0; j <= cells; ++j) {
      double x1 = -span + j * h;
      double wj = (j == 0 || j == cells) ? 0.5 : 1.0;
      inner += wj * normal(x1, a * x0 + u[1](0), q) *
               normal(y.y[1](0), c * x1, r);
    }
    total += wi * f0 * inner;
  }
  return total * h * h;
}

// --- Dual-route free-energy bound ----------------------------------------------

// The bound computed from evidences plus a correction, never from entropies:
//   B = log p_u(y) + log Z_q
//     + sum_t E[m_t]' Q^{-1} (D gamma_t - u_t)
//     + sum_t ( u_t' Q^{-1} u_t - sum_i gamma_t(i) d_i' Q^{-1} d_i ) / 2
//     - sum_t gamma_t' log q_t
// with m_t = x_t - A x_{t-1} and Z_q the soft-evidence chain normalizer.
// Valid for any (log_q, u) pair, not only fixed points. The posterior
// moments must come from the same (log_q, u).
inline double dual_route_bound(const ModelParams& p, double lds_log_evidence,
                               double hmm_log_evidence,
                               const std::vector<Vec>& x_mean,
                               const std::vector<Vec>& gammas,
                               const std::vector<Vec>& log_q,
                               const std::vector<Vec>& u) {
  const int T = static_cast<int>(x_mean.size());
  Mat qi = p.Q.inverse();
  double bound = lds_log_evidence + hmm_log_evidence;
  for (int t = 0; t < T; ++t) {
    Vec m = (t == 0) ? x_mean[0] : Vec(x_mean[t] - p.A * x_mean[t - 1]);
    bound += m.dot(qi * (p.D * gammas[t] - u[t]));
    bound += 0.5 * u[t].dot(qi * u[t]);
    for (int i = 0; i < p.num_states; ++i)
      bound -= 0.5 * gammas[t](i) * p.D.col(i).dot(qi * p.D.col(i));
    bound -= gammas[t].dot(log_q[t]);
  }
  return bound;
}

// --- Random instances ------------------------------------------------------------

inline Mat random_spd(int n, Rng& rng, double scale = 1.0) {
  Mat l(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) l(i, j) = rng.normal();
  return scale * (l * l.transpose() / n + 0.3 * Mat::Identity(n, n));
}

inline Vec random_distribution(int n, Rng& rng) {
  Vec p(n);
  for (int i = 0; i < n; ++i) p(i) = 0.1 + rng.uniform();
  return p / p.sum();
}

inline ModelParams random_model(int n, int m, int s, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.state_dim = n;
  p.obs_dim = m;
  p.num_states = s;
  p.A = Mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.A(i, j) = 0.8 * rng.normal() / std::sqrt(n);
  p.C = Mat(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.C(i, j) = rng.normal();
  p.D = Mat(n, s);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < s; ++j) p.D(i, j) = rng.normal();
  p.Q = random_spd(n, rng);
  p.R = random_spd(m, rng);
  p.Pi = Mat(s, s);
  for (int j = 0; j < s; ++j) p.Pi.col(j) = random_distribution(s, rng);
  p.pi0 = random_distribution(s, rng);
  return p;
}

inline std::vector<Vec> random_log_evidence(int t_len, int s, Rng& rng,
                                            double scale = 2.0) {
  std::vector<Vec> out(t_len);
  for (int t = 0; t < t_len; ++t) {
    Vec v(s);
    for (int i = 0; i < s; ++i) v(i) = scale * rng.normal();
    out[t] = v;
  }
  return out;
}

inline std::vector<Vec> random_inputs(int t_len, int n, Rng& rng) {
  std::vector<Vec> u(t_len);
  for (int t = 0; t < t_len; ++t) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    u[t] = v;
  }
  return u;
}

}  // namespace oracle
