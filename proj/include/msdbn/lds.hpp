#pragma once

#include <vector>

#include "msdbn/model.hpp"

namespace msdbn {

// Exact inference in the linear-Gaussian sub-chain with known deterministic
// inputs u_t. The x_0 prior is N(u_0, Q).
struct SmootherResult {
  std::vector<Vec> means;       // smoothed <x_t>
  std::vector<Mat> covs;        // smoothed Cov(x_t)
  std::vector<Mat> cross_covs;  // Cov(x_t, x_{t-1}), index t-1, t = 1..T-1
  std::vector<Vec> filtered_means;
  std::vector<Mat> filtered_covs;
  std::vector<Mat> innovation_vars;  // V_t = C P_{t|t-1} C' + R
  double log_likelihood = 0.0;       // log p(y_0..y_{T-1} | u)
};

// Forward pass only: fills filtered quantities, innovation variances and the
// exact Gaussian evidence. Smoothed fields are left empty.
SmootherResult kalman_filter(const ModelParams& params, const SequenceData& y,
                             const std::vector<Vec>& u);

// Forward pass plus Rauch-Tung-Striebel backward recursion. Adds smoothed
// means/covariances and the lag-one cross covariances needed by learning.
SmootherResult rts_smooth(const ModelParams& params, const SequenceData& y,
                          const std::vector<Vec>& u);

}  // namespace msdbn
