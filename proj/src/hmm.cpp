#include "msdbn/hmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace msdbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

HmmPosterior forward_backward(const Mat& Pi, const Vec& pi0,
                              const std::vector<Vec>& log_evidence) {
  const int T = static_cast<int>(log_evidence.size());
  const int s = static_cast<int>(pi0.size());
  if (T == 0) throw std::invalid_argument("forward_backward: empty evidence");

  std::vector<Vec> b(T);
  std::vector<double> z(T);
  std::vector<Vec> alpha(T);

  HmmPosterior post;
  for (int t = 0; t < T; ++t) {
    Vec pred = (t == 0) ? pi0 : Vec(Pi * alpha[t - 1]);
    // Per-step evidence shift: any constant is exact, so take the max over
    // states that carry predicted mass. The reachable maximizer then scales
    // to exactly 1 and cannot underflow no matter how wide the gaps between
    // states get; unreachable states are zeroed to keep the products finite.
    double shift = -kInf;
    for (int i = 0; i < s; ++i)
      if (pred(i) > 0.0 && log_evidence[t](i) > shift)
        shift = log_evidence[t](i);
    if (shift == -kInf)
      throw std::runtime_error(
          "forward_backward: all states impossible at step " +
          std::to_string(t));
    b[t] = Vec::Zero(s);
    for (int i = 0; i < s; ++i)
      if (pred(i) > 0.0) b[t](i) = std::exp(log_evidence[t](i) - shift);
    Vec a = pred.cwiseProduct(b[t]);
    z[t] = a.sum();
    if (!(z[t] > 0.0))
      throw std::runtime_error(
          "forward_backward: all states impossible at step " +
          std::to_string(t));
    alpha[t] = a / z[t];
    post.log_evidence += std::log(z[t]) + shift;
  }

  // Backward pass with per-step renormalization: gammas and xis are ratios,
  // so beta's scale per step is arbitrary. Keeping it summed to one (instead
  // of dividing by the forward normalizers) sidesteps the overflow that the
  // classic scaled recursion hits when evidence gaps span hundreds of nats.
  std::vector<Vec> beta(T);
  beta[T - 1] = Vec::Ones(s);
  for (int t = T - 2; t >= 0; --t) {
    Vec w = Pi.transpose() * Vec(b[t + 1].cwiseProduct(beta[t + 1]));
    double total = w.sum();
    if (!(total > 0.0))
      throw std::runtime_error(
          "forward_backward: posterior underflow at step " +
          std::to_string(t));
    beta[t] = w / total;
  }

  post.gammas.resize(T);
  for (int t = 0; t < T; ++t) {
    Vec g = alpha[t].cwiseProduct(beta[t]);
    double total = g.sum();
    if (!(total > 0.0))
      throw std::runtime_error(
          "forward_backward: posterior underflow at step " +
          std::to_string(t));
    post.gammas[t] = g / total;
  }

  post.xis.resize(T - 1);
  for (int t = 1; t < T; ++t) {
    Vec row = b[t].cwiseProduct(beta[t]);  // factor on s_t = i
    Mat xi = row.asDiagonal() * Pi * alpha[t - 1].asDiagonal();
    double total = xi.sum();
    if (!(total > 0.0))
      throw std::runtime_error(
          "forward_backward: posterior underflow at step " +
          std::to_string(t));
    post.xis[t - 1] = xi / total;
  }
  return post;
}

ViterbiResult viterbi(const Mat& Pi, const Vec& pi0,
                      const std::vector<Vec>& log_evidence) {
  const int T = static_cast<int>(log_evidence.size());
  const int s = static_cast<int>(pi0.size());
  if (T == 0) throw std::invalid_argument("viterbi: empty evidence");

  Mat log_pi = Pi.array().log();
  Vec score = pi0.array().log() + log_evidence[0].array();
  Mat back = Mat::Zero(s, T);

  for (int t = 1; t < T; ++t) {
    Vec next(s);
    for (int i = 0; i < s; ++i) {
      int arg = 0;
      double best = score(0) + log_pi(i, 0);
      for (int j = 1; j < s; ++j) {
        double cand = score(j) + log_pi(i, j);
        if (cand > best) {  // strict: ties keep the lower predecessor
          best = cand;
          arg = j;
        }
      }
      next(i) = best + log_evidence[t](i);
      back(i, t) = arg;
    }
    score = next;
  }

  ViterbiResult result;
  int arg = 0;
  for (int i = 1; i < s; ++i)
    if (score(i) > score(arg)) arg = i;
  if (score(arg) == -kInf)
    throw std::runtime_error("viterbi: no path has positive probability");
  result.log_score = score(arg);
  result.path.assign(T, 0);
  result.path[T - 1] = arg;
  for (int t = T - 1; t > 0; --t)
    result.path[t - 1] = static_cast<int>(back(result.path[t], t));
  return result;
}

}  // namespace msdbn
