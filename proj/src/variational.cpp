#include "msdbn/variational.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace msdbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PosteriorStats make_stats(const SmootherResult& smoother,
                          const HmmPosterior& hmm_post, double bound) {
  const int T = static_cast<int>(smoother.means.size());
  PosteriorStats stats;
  stats.x_mean = smoother.means;
  stats.x_second_moment.resize(T);
  stats.x_cross_moment.resize(T - 1);
  for (int t = 0; t < T; ++t) {
    stats.x_second_moment[t] =
        smoother.covs[t] + smoother.means[t] * smoother.means[t].transpose();
    if (t > 0)
      stats.x_cross_moment[t - 1] =
          smoother.cross_covs[t - 1] +
          smoother.means[t] * smoother.means[t - 1].transpose();
  }
  stats.s_mean = hmm_post.gammas;
  stats.s_pair_mean = hmm_post.xis;
  stats.bound = bound;
  return stats;
}

}  // namespace

std::vector<Vec> compute_u(const Mat& D, const std::vector<Vec>& s_mean) {
  std::vector<Vec> u;
  u.reserve(s_mean.size());
  for (const Vec& g : s_mean) u.push_back(D * g);
  return u;
}

std::vector<Vec> compute_log_q(const ModelParams& params,
                               const std::vector<Vec>& x_mean) {
  const int T = static_cast<int>(x_mean.size());
  auto llt_q = chol_jittered(params.Q, "Q");
  Mat qi_d = llt_q.solve(params.D);  // Q^{-1} D
  Vec half_d = 0.5 * (params.D.array() * qi_d.array()).colwise().sum();

  std::vector<Vec> log_q(T);
  for (int t = 0; t < T; ++t) {
    Vec m = (t == 0) ? x_mean[0] : Vec(x_mean[t] - params.A * x_mean[t - 1]);
    log_q[t] = qi_d.transpose() * m - half_d;
  }
  return log_q;
}

double free_energy_bound(const ModelParams& params, const SequenceData& y,
                         const SmootherResult& smoother,
                         const HmmPosterior& hmm_post) {
  const int T = y.length();
  const int n = params.state_dim;
  const int m = params.obs_dim;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (static_cast<int>(smoother.means.size()) != T ||
      static_cast<int>(hmm_post.gammas.size()) != T)
    throw std::invalid_argument("free_energy_bound: posterior length mismatch");

  auto llt_q = chol_jittered(params.Q, "Q");
  auto llt_r = chol_jittered(params.R, "R");
  Mat qi_d = llt_q.solve(params.D);
  Vec d_qi_d = (params.D.array() * qi_d.array()).colwise().sum();

  // Expected joint log density under the factored posterior.
  double expected =
      -0.5 * T * (log_det(llt_q) + n * log2pi + log_det(llt_r) + m * log2pi);
  for (int t = 0; t < T; ++t) {
    Mat second =
        smoother.covs[t] + smoother.means[t] * smoother.means[t].transpose();
    Mat delta2;
    Vec mean_innov;
    if (t == 0) {
      delta2 = second;
      mean_innov = smoother.means[0];
    } else {
      Mat cross = smoother.cross_covs[t - 1] +
                  smoother.means[t] * smoother.means[t - 1].transpose();
      Mat prev_second = smoother.covs[t - 1] +
                        smoother.means[t - 1] * smoother.means[t - 1].transpose();
      delta2 = second - cross * params.A.transpose() -
               params.A * cross.transpose() +
               params.A * prev_second * params.A.transpose();
      mean_innov = smoother.means[t] - params.A * smoother.means[t - 1];
    }
    const Vec& gamma = hmm_post.gammas[t];
    double quad_q = llt_q.solve(delta2).trace() -
                    2.0 * gamma.dot(qi_d.transpose() * mean_innov) +
                    gamma.dot(d_qi_d);
    Vec dy = y.y[t] - params.C * smoother.means[t];
    double quad_r =
        dy.dot(llt_r.solve(dy)) +
        llt_r.solve(params.C * smoother.covs[t] * params.C.transpose()).trace();
    expected -= 0.5 * (quad_q + quad_r);
  }
  for (int t = 1; t < T; ++t) {
    const Mat& xi = hmm_post.xis[t - 1];
    for (int i = 0; i < params.num_states; ++i)
      for (int j = 0; j < params.num_states; ++j)
        if (xi(i, j) > 0.0) expected += xi(i, j) * std::log(params.Pi(i, j));
  }
  for (int i = 0; i < params.num_states; ++i)
    if (hmm_post.gammas[0](i) > 0.0)
      expected += hmm_post.gammas[0](i) * std::log(params.pi0(i));

  // Entropy of the Gaussian chain: the smoothing posterior factorizes as
  // q(x_{T-1}) prod_t q(x_t | x_{t+1}) with conditional covariance
  // P_{t|t} - J_t P_{t+1|t} J_t'.
  double h_x = 0.5 * T * n * (1.0 + log2pi);
  h_x += 0.5 * log_det(chol_jittered(smoother.filtered_covs[T - 1],
                                     "filtered covariance"));
  for (int t = 0; t + 1 < T; ++t) {
    const Mat& pf = smoother.filtered_covs[t];
    Mat pp = symmetrize(params.A * pf * params.A.transpose() + params.Q);
    Mat j = chol(pp, "predicted covariance").solve(params.A * pf).transpose();
    Mat cond = symmetrize(pf - j * pp * j.transpose());
    h_x += 0.5 * log_det(chol_jittered(cond, "posterior conditional covariance"));
  }

  // Entropy of the discrete chain from its marginal and pairwise posteriors.
  double h_s = 0.0;
  for (int i = 0; i < params.num_states; ++i) {
    double g = hmm_post.gammas[0](i);
    if (g > 0.0) h_s -= g * std::log(g);
  }
  for (int t = 1; t < T; ++t) {
    const Mat& xi = hmm_post.xis[t - 1];
    const Vec& prev = hmm_post.gammas[t - 1];
    for (int i = 0; i < params.num_states; ++i)
      for (int j = 0; j < params.num_states; ++j)
        if (xi(i, j) > 0.0)
          h_s -= xi(i, j) * (std::log(xi(i, j)) - std::log(prev(j)));
  }

  return expected + h_x + h_s;
}

std::pair<VariationalState, PosteriorStats> e_step(
    const ModelParams& params, const SequenceData& y,
    const std::optional<VariationalState>& init, double tol, int max_iter) {
  const int T = y.length();
  if (T == 0) throw std::invalid_argument("e_step: empty sequence");
  if (max_iter < 1) throw std::invalid_argument("e_step: max_iter < 1");

  VariationalState state;
  SmootherResult smoother;
  bool init_with_q = init.has_value() && !init->log_q.empty();
  std::vector<Vec> prev_u;
  if (init_with_q) {
    if (static_cast<int>(init->log_q.size()) != T)
      throw std::invalid_argument("e_step: init log_q length mismatch");
    state.log_q = init->log_q;
  } else {
    if (init.has_value() && !init->u.empty()) {
      if (static_cast<int>(init->u.size()) != T)
        throw std::invalid_argument("e_step: init u length mismatch");
      prev_u = init->u;
    } else {
      prev_u.assign(T, params.D * params.pi0);
    }
    smoother = rts_smooth(params, y, prev_u);
  }

  HmmPosterior hmm_post;
  double bound = -kInf;
  double prev_bound = -kInf;
  for (int it = 1; it <= max_iter; ++it) {
    if (!(it == 1 && init_with_q))
      state.log_q = compute_log_q(params, smoother.means);
    hmm_post = forward_backward(params.Pi, params.pi0, state.log_q);
    state.u = compute_u(params.D, hmm_post.gammas);
    smoother = rts_smooth(params, y, state.u);
    bound = free_energy_bound(params, y, smoother, hmm_post);
    state.bound_trace.push_back(bound);
    state.iterations = it;

    bool u_fixed = !prev_u.empty();
    for (int t = 0; u_fixed && t < T; ++t)
      u_fixed = (state.u[t] - prev_u[t]).cwiseAbs().maxCoeff() == 0.0;
    double rel = std::abs(bound - prev_bound) / (1.0 + std::abs(bound));
    if (u_fixed || rel < tol) {
      state.converged = true;
      break;
    }
    prev_bound = bound;
    prev_u = state.u;
  }
  return {std::move(state), make_stats(smoother, hmm_post, bound)};
}

}  // namespace msdbn
