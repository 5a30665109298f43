#pragma once

#include <vector>

#include "msdbn/model.hpp"

namespace msdbn {

// --- Greedy truncated Viterbi -------------------------------------------

struct GreedyResult {
  std::vector<int> path;
  double total_cost = 0.0;     // accumulated arc costs along the chosen path
  std::vector<Vec> u;          // inputs implied by the path, u_t = d_{path[t]}
};

// Decodes one switch state per step by minimizing the instantaneous cost
//   nu_t' V_t^{-1} nu_t - log Pr(s_t | s_{t-1})
// where nu_t is the innovation of a Kalman filter driven by the candidate
// input and V_t is the (path independent) innovation covariance. Ties go to
// the lower state index. The filter then advances with the winner.
GreedyResult greedy_truncated_viterbi(const ModelParams& params,
                                      const SequenceData& y);

// --- Exact posterior by enumeration --------------------------------------

struct PathPosterior {
  std::vector<std::vector<int>> paths;   // lexicographic, s_0 most significant
  std::vector<double> log_joint;         // log p(path, y)
  std::vector<double> weights;           // normalized posterior path weights
  double log_evidence = 0.0;             // log p(y)
  std::vector<Vec> s_marginals;          // posterior state marginals per step
  std::vector<Vec> x_marginals;          // posterior means of x per step
  std::vector<int> map_path;             // argmax weight, first (lowest) wins
};

// Enumerates all S^T switch paths, scoring each with the exact continuous
// marginal likelihood. Throws std::invalid_argument when S^T > max_paths.
PathPosterior exact_posterior(const ModelParams& params, const SequenceData& y,
                              long max_paths = 4096);

// --- Gradient input estimate ---------------------------------------------

// Second differences of a position track: central in the interior, one-sided
// at the ends. positions is T x d, result is T x d accelerations. Requires
// T >= 5.
Mat gradient_input_estimate(const Mat& positions, double dt);

// --- Two-state scalar demo -----------------------------------------------

struct TwoStateDemoPath {
  std::vector<int> path;       // state indices, 0 -> input -1, 1 -> input +1
  std::vector<double> inputs;
  double total_cost = 0.0;
};

// Scalar model with A = C = 1, inputs -1/+1, Q = k R and a symmetric
// transition matrix parameterized by eps. Observations fixed at {0, 0, -5}.
ModelParams twostate_model(double k, double R, double eps);
SequenceData twostate_observations();

// All 2^3 paths with their trellis costs (innovation^2 / Var_t per step plus
// -eps for staying, +eps for switching), sorted by cost ascending with ties
// broken lexicographically.
std::vector<TwoStateDemoPath> twostate_trellis(double k, double R, double eps);

// Stepwise minimization of the same arc costs.
TwoStateDemoPath twostate_greedy(double k, double R, double eps);

}  // namespace msdbn
