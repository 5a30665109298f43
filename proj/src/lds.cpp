#include "msdbn/lds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace msdbn {

namespace {

// Shared forward pass; keeps the predicted covariances for the smoother.
SmootherResult filter_pass(const ModelParams& params, const SequenceData& y,
                           const std::vector<Vec>& u,
                           std::vector<Mat>* predicted_covs) {
  const int T = y.length();
  if (T == 0) throw std::invalid_argument("kalman_filter: empty sequence");
  if (static_cast<int>(u.size()) != T)
    throw std::invalid_argument("kalman_filter: u and y lengths differ");
  const int n = params.state_dim;
  const int m = params.obs_dim;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Mat eye = Mat::Identity(n, n);

  SmootherResult result;
  result.filtered_means.reserve(T);
  result.filtered_covs.reserve(T);
  result.innovation_vars.reserve(T);
  if (predicted_covs) predicted_covs->reserve(T);

  Vec mean;
  Mat cov;
  for (int t = 0; t < T; ++t) {
    Vec mp = (t == 0) ? u[0] : Vec(params.A * mean + u[t]);
    Mat pp = (t == 0) ? params.Q
                      : symmetrize(params.A * cov * params.A.transpose() +
                                   params.Q);
    if (predicted_covs) predicted_covs->push_back(pp);

    Vec nu = y.y[t] - params.C * mp;
    Mat v = symmetrize(params.C * pp * params.C.transpose() + params.R);
    auto llt_v = chol(v, "innovation covariance");
    result.log_likelihood -=
        0.5 * (nu.dot(llt_v.solve(nu)) + log_det(llt_v) + m * log2pi);

    Mat gain = llt_v.solve(params.C * pp).transpose();  // P C' V^{-1}
    Mat ikc = eye - gain * params.C;
    cov = symmetrize(ikc * pp * ikc.transpose() +
                     gain * params.R * gain.transpose());
    mean = mp + gain * nu;

    result.filtered_means.push_back(mean);
    result.filtered_covs.push_back(cov);
    result.innovation_vars.push_back(std::move(v));
  }
  return result;
}

}  // namespace

SmootherResult kalman_filter(const ModelParams& params, const SequenceData& y,
                             const std::vector<Vec>& u) {
  return filter_pass(params, y, u, nullptr);
}

SmootherResult rts_smooth(const ModelParams& params, const SequenceData& y,
                          const std::vector<Vec>& u) {
  std::vector<Mat> predicted;
  SmootherResult result = filter_pass(params, y, u, &predicted);
  const int T = y.length();

  result.means.resize(T);
  result.covs.resize(T);
  result.cross_covs.resize(T > 0 ? T - 1 : 0);
  result.means[T - 1] = result.filtered_means[T - 1];
  result.covs[T - 1] = result.filtered_covs[T - 1];

  for (int t = T - 2; t >= 0; --t) {
    const Mat& pf = result.filtered_covs[t];
    const Mat& pp = predicted[t + 1];  // A pf A' + Q
    auto llt_pp = chol(pp, "predicted covariance");
    Mat j = llt_pp.solve(params.A * pf).transpose();  // pf A' pp^{-1}
    Vec mp = params.A * result.filtered_means[t] + u[t + 1];
    result.means[t] =
        result.filtered_means[t] + j * (result.means[t + 1] - mp);
    result.covs[t] =
        symmetrize(pf + j * (result.covs[t + 1] - pp) * j.transpose());
    result.cross_covs[t] = result.covs[t + 1] * j.transpose();
  }
  return result;
}

}  // namespace msdbn
