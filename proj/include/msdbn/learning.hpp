#pragma once

#include <utility>
#include <vector>

#include "msdbn/model.hpp"
#include "msdbn/variational.hpp"

namespace msdbn {

// Which parameters the M-step may change. Freezing A and C covers models
// with known dynamics and unknown noise.
struct UpdateMask {
  bool A = true;
  bool C = true;
  bool D = true;
  bool Q = true;
  bool R = true;
  bool Pi = true;
  bool pi0 = true;
};

struct TrainConfig {
  double e_tol = 1e-3;    // relative bound threshold of the inner E-step
  double em_tol = 1e-4;   // relative bound threshold of the outer EM loop
  int max_em_iter = 50;
  int e_max_iter = 100;
  UpdateMask update;
};

// Moment accumulators reduced over time steps and sequences; everything the
// M-step and the expected joint log probability need. The stacked regressor
// is z_t = [x_{t-1}; s_t] with x_{-1} defined as zero.
struct SuffStats {
  int state_dim = 0;
  int obs_dim = 0;
  int num_states = 0;
  int num_sequences = 0;
  long total_steps = 0;   // sum of T over sequences
  Mat Sxx;                // sum <x_t x_t'>                    N x N
  Mat Szz;                // sum <z_t z_t'>                    (N+S) x (N+S)
  Mat Sxz;                // sum <x_t z_t'>                    N x (N+S)
  Mat Syy;                // sum y_t y_t'                      M x M
  Mat Syx;                // sum y_t <x_t'>                    M x N
  Mat xi_sum;             // sum over t >= 1 of <s_t s_{t-1}'> S x S
  Vec gamma_head_sum;     // sum over t >= 1 of <s_{t-1}>      S
  Vec gamma0_sum;         // sum over sequences of <s_0>       S
  double total_bound = 0.0;

  static SuffStats zero(int state_dim, int obs_dim, int num_states);
  void accumulate(const PosteriorStats& stats, const SequenceData& y);
};

// Closed-form maximizers of the expected joint log probability. A and D are
// the block solution of one least-squares problem in the stacked regressor;
// Q and R are the symmetrized residual covariances (eigenvalues floored at
// 1e-10 with a diagnostic). Transition columns with no expected visits keep
// their previous values. Masked parameters are copied from `current`.
// Throws std::runtime_error naming the parameter whose normal equations are
// rank deficient.
ModelParams m_step(const SuffStats& stats, const ModelParams& current,
                   const UpdateMask& mask);

// E_Q[log p(x, s, y)] as a function of the parameters for fixed statistics;
// the quantity the M-step maximizes.
double expected_joint_log_prob(const ModelParams& params,
                               const SuffStats& stats);

// Generalized EM: E-steps over all sequences (statistics summed, variational
// states warm-started across iterations) alternating with m_step. Records
// the total bound after every E-step; stops on relative bound change below
// em_tol or on max_em_iter. A bound decrease beyond 1e-6 throws.
std::pair<ModelParams, std::vector<double>> em_train(
    const std::vector<SequenceData>& sequences, const ModelParams& init,
    const TrainConfig& cfg);

}  // namespace msdbn
