#pragma once

#include <vector>

#include "msdbn/linalg.hpp"

namespace msdbn {

// Posteriors of a discrete chain under per-step soft evidence.
struct HmmPosterior {
  std::vector<Vec> gammas;   // <s_t>, one S-vector per step
  std::vector<Mat> xis;      // <s_t s_{t-1}'>, index t-1; entry (i,j) pairs
                             // s_t = i with s_{t-1} = j
  double log_evidence = 0.0; // log normalizer of the evidence-weighted chain
};

// Exact posteriors of the chain pi0(s_0) * prod Pi(s_t|s_{t-1}) *
// prod exp(log_evidence[t](s_t)). Evidence is accepted unnormalized and is
// handled in the log domain throughout; entries may be -infinity.
// Throws std::runtime_error when every state is impossible at some step.
HmmPosterior forward_backward(const Mat& Pi, const Vec& pi0,
                              const std::vector<Vec>& log_evidence);

struct ViterbiResult {
  std::vector<int> path;
  double log_score = 0.0;
};

// Maximizing path of the same joint. Ties break toward the lower state index.
ViterbiResult viterbi(const Mat& Pi, const Vec& pi0,
                      const std::vector<Vec>& log_evidence);

}  // namespace msdbn
