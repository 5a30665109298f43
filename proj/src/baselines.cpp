#include "msdbn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "msdbn/lds.hpp"

namespace msdbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double neg_log(double prob) { return prob > 0.0 ? -std::log(prob) : kInf; }

double log_sum_exp(const std::vector<double>& v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf) return -kInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

GreedyResult greedy_truncated_viterbi(const ModelParams& params,
                                      const SequenceData& y) {
  const int T = y.length();
  if (T == 0)
    throw std::invalid_argument("greedy_truncated_viterbi: empty sequence");
  const int s = params.num_states;
  const Mat eye = Mat::Identity(params.state_dim, params.state_dim);

  GreedyResult result;
  result.path.reserve(T);
  result.u.reserve(T);

  Vec mean;
  Mat cov;
  int prev = -1;
  for (int t = 0; t < T; ++t) {
    Mat pp = (t == 0) ? params.Q
                      : symmetrize(params.A * cov * params.A.transpose() +
                                   params.Q);
    Mat v = symmetrize(params.C * pp * params.C.transpose() + params.R);
    auto llt_v = chol(v, "innovation covariance");

    int best = -1;
    double best_cost = kInf;
    Vec best_nu;
    for (int i = 0; i < s; ++i) {
      Vec mp = (t == 0) ? Vec(params.D.col(i))
                        : Vec(params.A * mean + params.D.col(i));
      Vec nu = y.y[t] - params.C * mp;
      double cost = nu.dot(llt_v.solve(nu)) +
                    (t == 0 ? neg_log(params.pi0(i))
                            : neg_log(params.Pi(i, prev)));
      if (cost < best_cost) {  // strict: ties keep the lower state index
        best_cost = cost;
        best = i;
        best_nu = nu;
      }
    }
    if (best < 0 || best_cost == kInf)
      throw std::runtime_error(
          "greedy_truncated_viterbi: no admissible state at step " +
          std::to_string(t));

    Mat gain = llt_v.solve(params.C * pp).transpose();
    Mat ikc = eye - gain * params.C;
    cov = symmetrize(ikc * pp * ikc.transpose() +
                     gain * params.R * gain.transpose());
    Vec mp = (t == 0) ? Vec(params.D.col(best))
                      : Vec(params.A * mean + params.D.col(best));
    mean = mp + gain * best_nu;

    result.path.push_back(best);
    result.u.push_back(params.D.col(best));
    result.total_cost += best_cost;
    prev = best;
  }
  return result;
}

PathPosterior exact_posterior(const ModelParams& params, const SequenceData& y,
                              long max_paths) {
  const int T = y.length();
  const int s = params.num_states;
  if (T == 0) throw std::invalid_argument("exact_posterior: empty sequence");
  long count = 1;
  for (int t = 0; t < T; ++t) {
    count *= s;
    if (count > max_paths)
      throw std::invalid_argument(
          "exact_posterior: number of paths exceeds the limit");
  }

  PathPosterior post;
  post.paths.reserve(count);
  post.log_joint.reserve(count);
  std::vector<std::vector<Vec>> path_means(count);

  for (long p = 0; p < count; ++p) {
    std::vector<int> path(T);
    long rest = p;
    for (int t = T - 1; t >= 0; --t) {  // s_0 is the most significant digit
      path[t] = static_cast<int>(rest % s);
      rest /= s;
    }
    double log_prior = params.pi0(path[0]) > 0.0
                           ? std::log(params.pi0(path[0]))
                           : -kInf;
    for (int t = 1; t < T && log_prior > -kInf; ++t) {
      double prob = params.Pi(path[t], path[t - 1]);
      log_prior = prob > 0.0 ? log_prior + std::log(prob) : -kInf;
    }
    double log_joint = -kInf;
    if (log_prior > -kInf) {
      std::vector<Vec> u(T);
      for (int t = 0; t < T; ++t) u[t] = params.D.col(path[t]);
      SmootherResult sm = rts_smooth(params, y, u);
      log_joint = log_prior + sm.log_likelihood;
      path_means[p] = std::move(sm.means);
    }
    post.paths.push_back(std::move(path));
    post.log_joint.push_back(log_joint);
  }

  post.log_evidence = log_sum_exp(post.log_joint);
  if (post.log_evidence == -kInf)
    throw std::runtime_error(
        "exact_posterior: no path has positive probability");

  post.weights.resize(count);
  for (long p = 0; p < count; ++p)
    post.weights[p] = std::exp(post.log_joint[p] - post.log_evidence);

  post.s_marginals.assign(T, Vec::Zero(s));
  post.x_marginals.assign(T, Vec::Zero(params.state_dim));
  long map = 0;
  for (long p = 0; p < count; ++p) {
    if (post.weights[p] > post.weights[map]) map = p;
    if (post.weights[p] == 0.0) continue;
    for (int t = 0; t < T; ++t) {
      post.s_marginals[t](post.paths[p][t]) += post.weights[p];
      post.x_marginals[t] += post.weights[p] * path_means[p][t];
    }
  }
  post.map_path = post.paths[map];
  return post;
}

Mat gradient_input_estimate(const Mat& positions, double dt) {
  const int T = static_cast<int>(positions.rows());
  if (T < 5)
    throw std::invalid_argument(
        "gradient_input_estimate: need at least 5 samples");
  if (dt <= 0.0)
    throw std::invalid_argument("gradient_input_estimate: dt must be positive");

  auto diff = [dt, T](const Mat& f) {
    Mat g(T, f.cols());
    g.row(0) = (f.row(1) - f.row(0)) / dt;
    for (int t = 1; t + 1 < T; ++t)
      g.row(t) = (f.row(t + 1) - f.row(t - 1)) / (2.0 * dt);
    g.row(T - 1) = (f.row(T - 1) - f.row(T - 2)) / dt;
    return g;
  };
  return diff(diff(positions));
}

// --- Two-state scalar demo -------------------------------------------------

namespace {

// Path-independent innovation variances of the scalar filter with A = C = 1
// and Q = k R.
std::vector<double> twostate_vars(double k, double R, int T) {
  std::vector<double> vars(T);
  double pred = k * R;
  for (int t = 0; t < T; ++t) {
    double v = pred + R;
    vars[t] = v;
    double filt = pred * R / v;
    pred = filt + k * R;
  }
  return vars;
}

double twostate_input(int state) { return state == 0 ? -1.0 : 1.0; }

}  // namespace

ModelParams twostate_model(double k, double R, double eps) {
  ModelParams params;
  params.state_dim = 1;
  params.obs_dim = 1;
  params.num_states = 2;
  params.A = Mat::Constant(1, 1, 1.0);
  params.C = Mat::Constant(1, 1, 1.0);
  params.D = Mat(1, 2);
  params.D << -1.0, 1.0;
  params.Q = Mat::Constant(1, 1, k * R);
  params.R = Mat::Constant(1, 1, R);
  params.Pi = Mat(2, 2);
  params.Pi << 0.5 + eps, 0.5 - eps, 0.5 - eps, 0.5 + eps;
  params.pi0 = Vec::Constant(2, 0.5);
  return params;
}

SequenceData twostate_observations() {
  SequenceData data;
  for (double v : {0.0, 0.0, -5.0}) data.y.push_back(Vec::Constant(1, v));
  return data;
}

std::vector<TwoStateDemoPath> twostate_trellis(double k, double R,
                                               double eps) {
  SequenceData data = twostate_observations();
  const int T = data.length();
  std::vector<double> vars = twostate_vars(k, R, T);

  std::vector<TwoStateDemoPath> out;
  for (int code = 0; code < (1 << T); ++code) {
    TwoStateDemoPath entry;
    double xfilt = 0.0;
    double pred_var = k * R;
    for (int t = 0; t < T; ++t) {
      int state = (code >> (T - 1 - t)) & 1;  // s_0 is the leading bit
      double input = twostate_input(state);
      double xpred = (t == 0) ? input : xfilt + input;
      double innov = data.y[t](0) - xpred;
      entry.total_cost += innov * innov / vars[t];
      if (t > 0)
        entry.total_cost += (state == entry.path[t - 1]) ? -eps : eps;
      double gain = pred_var / vars[t];
      xfilt = xpred + gain * innov;
      pred_var = pred_var * R / vars[t] + k * R;
      entry.path.push_back(state);
      entry.inputs.push_back(input);
    }
    out.push_back(std::move(entry));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TwoStateDemoPath& a, const TwoStateDemoPath& b) {
                     return a.total_cost < b.total_cost;
                   });
  return out;
}

TwoStateDemoPath twostate_greedy(double k, double R, double eps) {
  SequenceData data = twostate_observations();
  const int T = data.length();
  std::vector<double> vars = twostate_vars(k, R, T);

  TwoStateDemoPath entry;
  double xfilt = 0.0;
  double pred_var = k * R;
  for (int t = 0; t < T; ++t) {
    int best = 0;
    double best_cost = kInf;
    double best_innov = 0.0;
    for (int state = 0; state < 2; ++state) {
      double xpred = (t == 0) ? twostate_input(state)
                              : xfilt + twostate_input(state);
      double innov = data.y[t](0) - xpred;
      double cost = innov * innov / vars[t];
      if (t > 0) cost += (state == entry.path[t - 1]) ? -eps : eps;
      if (cost < best_cost) {  // strict: ties keep the lower state
        best_cost = cost;
        best = state;
        best_innov = innov;
      }
    }
    double xpred = (t == 0) ? twostate_input(best) : xfilt + twostate_input(best);
    double gain = pred_var / vars[t];
    xfilt = xpred + gain * best_innov;
    pred_var = pred_var * R / vars[t] + k * R;
    entry.path.push_back(best);
    entry.inputs.push_back(twostate_input(best));
    entry.total_cost += best_cost;
  }
  return entry;
}

}  // namespace msdbn
