#include "msdbn/learning.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "msdbn/parallel.hpp"

namespace msdbn {

namespace {

constexpr double kCovarianceFloor = 1e-10;
constexpr double kBoundDecreaseTol = 1e-6;

// rhs * lhs^{-1} for a symmetric positive-definite lhs.
Mat solve_normal(const Mat& lhs, const Mat& rhs, const char* what) {
  Eigen::LLT<Mat> llt(symmetrize(lhs));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) +
                             ": normal equations are rank deficient");
  return llt.solve(rhs.transpose()).transpose();
}

Mat floored_covariance(const Mat& residual, long total_steps,
                       const char* what) {
  Mat cov = symmetrize(residual / static_cast<double>(total_steps));
  bool clipped = false;
  cov = floor_eigenvalues(cov, kCovarianceFloor, &clipped);
  if (clipped)
    std::cerr << "warning: m_step: floored eigenvalues of " << what << " at "
              << kCovarianceFloor << "\n";
  return cov;
}

}  // namespace

SuffStats SuffStats::zero(int state_dim, int obs_dim, int num_states) {
  SuffStats s;
  s.state_dim = state_dim;
  s.obs_dim = obs_dim;
  s.num_states = num_states;
  s.Sxx = Mat::Zero(state_dim, state_dim);
  s.Szz = Mat::Zero(state_dim + num_states, state_dim + num_states);
  s.Sxz = Mat::Zero(state_dim, state_dim + num_states);
  s.Syy = Mat::Zero(obs_dim, obs_dim);
  s.Syx = Mat::Zero(obs_dim, state_dim);
  s.xi_sum = Mat::Zero(num_states, num_states);
  s.gamma_head_sum = Vec::Zero(num_states);
  s.gamma0_sum = Vec::Zero(num_states);
  return s;
}

void SuffStats::accumulate(const PosteriorStats& stats,
                           const SequenceData& y) {
  const int T = y.length();
  const int n = state_dim;
  const int s = num_states;
  if (static_cast<int>(stats.x_mean.size()) != T)
    throw std::invalid_argument("SuffStats: posterior length mismatch");

  for (int t = 0; t < T; ++t) {
    const Vec& gamma = stats.s_mean[t];
    Sxx += stats.x_second_moment[t];
    Szz.bottomRightCorner(s, s) += Mat(gamma.asDiagonal());
    Sxz.rightCols(s) += stats.x_mean[t] * gamma.transpose();
    if (t > 0) {
      const Vec& xprev = stats.x_mean[t - 1];
      Szz.topLeftCorner(n, n) += stats.x_second_moment[t - 1];
      Mat xs = xprev * gamma.transpose();
      Szz.topRightCorner(n, s) += xs;
      Szz.bottomLeftCorner(s, n) += xs.transpose();
      Sxz.leftCols(n) += stats.x_cross_moment[t - 1];
      xi_sum += stats.s_pair_mean[t - 1];
      gamma_head_sum += stats.s_mean[t - 1];
    }
    Syy += y.y[t] * y.y[t].transpose();
    Syx += y.y[t] * stats.x_mean[t].transpose();
  }
  total_steps += T;
  num_sequences += 1;
  gamma0_sum += stats.s_mean[0];
  total_bound += stats.bound;
}

ModelParams m_step(const SuffStats& stats, const ModelParams& current,
                   const UpdateMask& mask) {
  const int n = stats.state_dim;
  const int s = stats.num_states;
  if (stats.total_steps == 0)
    throw std::invalid_argument("m_step: empty statistics");
  ModelParams next = current;

  if (mask.A && mask.D) {
    Mat w = solve_normal(stats.Szz, stats.Sxz, "A and D");
    next.A = w.leftCols(n);
    next.D = w.rightCols(s);
  } else if (mask.A) {
    Mat rhs = stats.Sxz.leftCols(n) -
              next.D * stats.Szz.bottomLeftCorner(s, n);
    next.A = solve_normal(stats.Szz.topLeftCorner(n, n), rhs, "A");
  } else if (mask.D) {
    Mat rhs = stats.Sxz.rightCols(s) - next.A * stats.Szz.topRightCorner(n, s);
    next.D = solve_normal(stats.Szz.bottomRightCorner(s, s), rhs, "D");
  }

  if (mask.Q) {
    Mat w(n, n + s);
    w << next.A, next.D;
    Mat residual = stats.Sxx - w * stats.Sxz.transpose() -
                   stats.Sxz * w.transpose() + w * stats.Szz * w.transpose();
    next.Q = floored_covariance(residual, stats.total_steps, "Q");
  }

  if (mask.C) next.C = solve_normal(stats.Sxx, stats.Syx, "C");

  if (mask.R) {
    Mat residual = stats.Syy - next.C * stats.Syx.transpose() -
                   stats.Syx * next.C.transpose() +
                   next.C * stats.Sxx * next.C.transpose();
    next.R = floored_covariance(residual, stats.total_steps, "R");
  }

  if (mask.Pi) {
    for (int j = 0; j < s; ++j) {
      if (stats.gamma_head_sum(j) > 0.0) {
        next.Pi.col(j) = stats.xi_sum.col(j) / stats.gamma_head_sum(j);
      } else {
        std::cerr << "warning: m_step: state " << j
                  << " has no expected visits; keeping its transition column\n";
      }
    }
  }

  if (mask.pi0) next.pi0 = stats.gamma0_sum / stats.num_sequences;

  return next;
}

double expected_joint_log_prob(const ModelParams& params,
                               const SuffStats& stats) {
  const int n = stats.state_dim;
  const int m = stats.obs_dim;
  const int s = stats.num_states;
  const double steps = static_cast<double>(stats.total_steps);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  Mat w(n, n + s);
  w << params.A, params.D;
  Mat quad_q = stats.Sxx - w * stats.Sxz.transpose() -
               stats.Sxz * w.transpose() + w * stats.Szz * w.transpose();
  Mat quad_r = stats.Syy - params.C * stats.Syx.transpose() -
               stats.Syx * params.C.transpose() +
               params.C * stats.Sxx * params.C.transpose();

  auto llt_q = chol_jittered(params.Q, "Q");
  auto llt_r = chol_jittered(params.R, "R");
  double value = -0.5 * llt_q.solve(quad_q).trace() -
                 0.5 * steps * (log_det(llt_q) + n * log2pi) -
                 0.5 * llt_r.solve(quad_r).trace() -
                 0.5 * steps * (log_det(llt_r) + m * log2pi);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j)
      if (stats.xi_sum(i, j) > 0.0)
        value += stats.xi_sum(i, j) * std::log(params.Pi(i, j));
    if (stats.gamma0_sum(i) > 0.0)
      value += stats.gamma0_sum(i) * std::log(params.pi0(i));
  }
  return value;
}

std::pair<ModelParams, std::vector<double>> em_train(
    const std::vector<SequenceData>& sequences, const ModelParams& init,
    const TrainConfig& cfg) {
  if (sequences.empty())
    throw std::invalid_argument("em_train: no sequences");
  validate(init);
  ModelParams params = init;
  const int count = static_cast<int>(sequences.size());

  // Warm starts: the soft evidence for each sequence is recomputed from the
  // previous posterior means under the new parameters, so every E-step
  // resumes coordinate ascent from the previous posterior and the recorded
  // bound never decreases across the M-step.
  std::vector<std::vector<Vec>> prev_x_mean(count);
  std::vector<double> history;

  for (int iter = 0; iter < cfg.max_em_iter; ++iter) {
    SuffStats stats =
        SuffStats::zero(params.state_dim, params.obs_dim, params.num_states);
    std::vector<PosteriorStats> per_seq(count);
    parallel_for(count, [&](int i) {
      std::optional<VariationalState> start;
      if (!prev_x_mean[i].empty()) {
        VariationalState v;
        v.log_q = compute_log_q(params, prev_x_mean[i]);
        start = std::move(v);
      }
      per_seq[i] =
          e_step(params, sequences[i], start, cfg.e_tol, cfg.e_max_iter)
              .second;
    });
    for (int i = 0; i < count; ++i) {
      stats.accumulate(per_seq[i], sequences[i]);
      prev_x_mean[i] = std::move(per_seq[i].x_mean);
    }

    double total = stats.total_bound;
    if (!history.empty()) {
      double prev = history.back();
      if (total < prev - kBoundDecreaseTol)
        throw std::runtime_error("em_train: bound decreased from " +
                                 std::to_string(prev) + " to " +
                                 std::to_string(total));
      history.push_back(total);
      if (std::abs(total - prev) / (1.0 + std::abs(total)) < cfg.em_tol) break;
    } else {
      history.push_back(total);
    }
    if (iter + 1 < cfg.max_em_iter)
      params = m_step(stats, params, cfg.update);
  }
  return {std::move(params), std::move(history)};
}

}  // namespace msdbn
