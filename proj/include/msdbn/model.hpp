#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "msdbn/linalg.hpp"

namespace msdbn {

// Mixed-state model: a discrete Markov chain s_t selects the input level of
// a linear dynamic system whose output is observed through noise.
//
//   s_0 ~ pi0,   Pr(s_{t+1} = e_i | s_t = e_j) = Pi(i, j)
//   u_t = D s_t + r_t,            r_t ~ N(0, Q)
//   x_0 = u_0,   x_t = A x_{t-1} + u_t
//   y_t = C x_t + w_t,            w_t ~ N(0, R)
//
// The input matrix is the identity and the physical state noise is zero, so
// u_t folds into the state recursion and Q doubles as the x_0 prior
// covariance. Pi is column-stochastic: column j is the distribution of the
// next state given current state j.
struct ModelParams {
  int state_dim = 0;   // N
  int obs_dim = 0;     // M
  int num_states = 0;  // S
  Mat A;               // N x N state transition
  Mat C;               // M x N observation matrix
  Mat D;               // N x S, column i is the input level of state i
  Mat Q;               // N x N input noise covariance
  Mat R;               // M x M measurement noise covariance
  Mat Pi;              // S x S column-stochastic transition matrix
  Vec pi0;             // S initial state distribution
};

// One observation sequence, optionally with the latents that generated it.
struct SequenceData {
  std::vector<Vec> y;            // T observations of dimension M
  std::vector<int> true_states;  // empty when unknown
  std::vector<Vec> true_x;       // empty when unknown

  int length() const { return static_cast<int>(y.size()); }
};

struct LatentSample {
  std::vector<int> states;
  std::vector<Vec> x;
  std::vector<Vec> u;
};

// Checks every ModelParams invariant. Throws std::invalid_argument with a
// message naming the offending field.
void validate(const ModelParams& params);

// Ancestral draw of length T. Deterministic given the seed.
std::pair<SequenceData, LatentSample> sample(const ModelParams& params, int T,
                                             std::uint64_t seed);

// Negative log of the joint density of (x, s, y). Lower energy means higher
// joint probability. Latent configurations that cross a zero-probability
// transition (or initial state) evaluate to +infinity.
double joint_energy(const ModelParams& params, const std::vector<Vec>& x,
                    const std::vector<int>& s, const SequenceData& y);

}  // namespace msdbn
