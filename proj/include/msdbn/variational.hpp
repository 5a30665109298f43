#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "msdbn/hmm.hpp"
#include "msdbn/lds.hpp"
#include "msdbn/model.hpp"

namespace msdbn {

// Variational parameters of the decoupled approximation: soft evidence
// log q_t fed to the discrete chain and deterministic inputs u_t fed to the
// continuous chain, plus the trace of the free-energy bound across sweeps.
struct VariationalState {
  std::vector<Vec> log_q;  // T entries of dimension S, unnormalized
  std::vector<Vec> u;      // T entries of dimension N
  int iterations = 0;
  std::vector<double> bound_trace;  // one bound value per sweep
  bool converged = false;
};

// Expected sufficient statistics of the hidden states under the factored
// posterior. Cross terms between chains factor as <x_t><s_t>'.
struct PosteriorStats {
  std::vector<Vec> x_mean;            // <x_t>
  std::vector<Mat> x_second_moment;   // <x_t x_t'>
  std::vector<Mat> x_cross_moment;    // <x_t x_{t-1}'>, index t-1
  std::vector<Vec> s_mean;            // <s_t>
  std::vector<Mat> s_pair_mean;       // <s_t s_{t-1}'>, index t-1
  double bound = 0.0;
};

// u_t = D <s_t>: the expected input given the discrete-chain marginals.
std::vector<Vec> compute_u(const Mat& D, const std::vector<Vec>& s_mean);

// log q_t(i) = d_i' Q^{-1} (<x_t> - A <x_{t-1}> - d_i / 2), with <x_{-1}> = 0.
std::vector<Vec> compute_log_q(const ModelParams& params,
                               const std::vector<Vec>& x_mean);

// Free-energy lower bound on log p(y): the expected joint log density under
// the factored posterior plus the entropies of the two sub-chains. The
// smoother result must carry smoothed moments (rts_smooth, not the filter).
double free_energy_bound(const ModelParams& params, const SequenceData& y,
                         const SmootherResult& smoother,
                         const HmmPosterior& hmm_post);

// Fixed-point coordinate ascent: q from <x>, <s> from q, u from <s>, <x>
// from (y, u), until the relative bound change drops below tol or max_iter
// sweeps have run. `init` may carry a starting log_q (its sweep is counted
// as iteration 1) or a starting u; by default <x> is initialized from a
// smoothing pass with u_t = D pi0. Non-convergence is reported through the
// converged flag.
std::pair<VariationalState, PosteriorStats> e_step(
    const ModelParams& params, const SequenceData& y,
    const std::optional<VariationalState>& init = std::nullopt,
    double tol = 1e-3, int max_iter = 100);

}  // namespace msdbn
