#include "msdbn/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "msdbn/rng.hpp"

namespace msdbn {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kStochasticTol = 1e-9;

void check_dims(const Mat& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw std::invalid_argument(std::string(name) + ": expected " +
                                std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
}

void check_spd(const Mat& m, const char* name) {
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale)
    throw std::invalid_argument(std::string(name) + ": not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument(std::string(name) +
                                ": not positive definite");
}

void check_distribution(const Vec& p, const char* name) {
  if (p.minCoeff() < 0.0)
    throw std::invalid_argument(std::string(name) + ": negative entry");
  if (std::abs(p.sum() - 1.0) > kStochasticTol)
    throw std::invalid_argument(std::string(name) + ": does not sum to 1");
}

int draw_categorical(const Vec& p, Rng& rng) {
  double r = rng.uniform() * p.sum();
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (r <= acc) return i;
  }
  return static_cast<int>(p.size()) - 1;
}

Vec draw_gaussian(const Mat& chol_lower, Rng& rng) {
  Vec z(chol_lower.rows());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return chol_lower * z;
}

}  // namespace

void validate(const ModelParams& params) {
  const int n = params.state_dim;
  const int m = params.obs_dim;
  const int s = params.num_states;
  if (n <= 0) throw std::invalid_argument("state_dim: must be positive");
  if (m <= 0) throw std::invalid_argument("obs_dim: must be positive");
  if (s <= 0) throw std::invalid_argument("num_states: must be positive");
  check_dims(params.A, n, n, "A");
  check_dims(params.C, m, n, "C");
  check_dims(params.D, n, s, "D");
  check_dims(params.Q, n, n, "Q");
  check_dims(params.R, m, m, "R");
  check_dims(params.Pi, s, s, "Pi");
  if (params.pi0.size() != s)
    throw std::invalid_argument("pi0: expected size " + std::to_string(s) +
                                ", got " + std::to_string(params.pi0.size()));
  if (!params.A.allFinite()) throw std::invalid_argument("A: non-finite entry");
  if (!params.C.allFinite()) throw std::invalid_argument("C: non-finite entry");
  if (!params.D.allFinite()) throw std::invalid_argument("D: non-finite entry");
  check_spd(params.Q, "Q");
  check_spd(params.R, "R");
  if (params.Pi.minCoeff() < 0.0)
    throw std::invalid_argument("Pi: negative entry");
  for (int j = 0; j < s; ++j)
    if (std::abs(params.Pi.col(j).sum() - 1.0) > kStochasticTol)
      throw std::invalid_argument("Pi: column " + std::to_string(j) +
                                  " does not sum to 1");
  check_distribution(params.pi0, "pi0");
}

std::pair<SequenceData, LatentSample> sample(const ModelParams& params, int T,
                                             std::uint64_t seed) {
  validate(params);
  if (T <= 0) throw std::invalid_argument("T: must be positive");
  Rng rng(seed);
  Mat lq = chol(params.Q, "Q").matrixL();
  Mat lr = chol(params.R, "R").matrixL();

  SequenceData data;
  LatentSample latent;
  data.y.reserve(T);
  latent.states.reserve(T);
  latent.x.reserve(T);
  latent.u.reserve(T);

  int state = draw_categorical(params.pi0, rng);
  Vec x;
  for (int t = 0; t < T; ++t) {
    if (t > 0) state = draw_categorical(params.Pi.col(state), rng);
    Vec u = params.D.col(state) + draw_gaussian(lq, rng);
    x = (t == 0) ? u : Vec(params.A * x + u);
    Vec y = params.C * x + draw_gaussian(lr, rng);
    latent.states.push_back(state);
    latent.u.push_back(u);
    latent.x.push_back(x);
    data.y.push_back(std::move(y));
  }
  data.true_states = latent.states;
  data.true_x = latent.x;
  return {std::move(data), std::move(latent)};
}

double joint_energy(const ModelParams& params, const std::vector<Vec>& x,
                    const std::vector<int>& s, const SequenceData& y) {
  const int T = y.length();
  if (static_cast<int>(x.size()) != T || static_cast<int>(s.size()) != T)
    throw std::invalid_argument(
        "joint_energy: x, s and y must have equal lengths");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double log2pi = std::log(2.0 * std::numbers::pi);

  auto llt_q = chol(params.Q, "Q");
  auto llt_r = chol(params.R, "R");

  double energy = 0.5 * T *
                  (log_det(llt_q) + params.state_dim * log2pi +
                   log_det(llt_r) + params.obs_dim * log2pi);
  for (int t = 0; t < T; ++t) {
    Vec prev = (t == 0) ? Vec(Vec::Zero(params.state_dim)) : Vec(params.A * x[t - 1]);
    Vec du = x[t] - prev - params.D.col(s[t]);
    energy += 0.5 * du.dot(llt_q.solve(du));
    Vec dy = y.y[t] - params.C * x[t];
    energy += 0.5 * dy.dot(llt_r.solve(dy));
    double prob = (t == 0) ? params.pi0(s[0]) : params.Pi(s[t], s[t - 1]);
    if (prob <= 0.0) return inf;
    energy -= std::log(prob);
  }
  return energy;
}

}  // namespace msdbn
