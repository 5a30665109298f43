#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "msdbn/baselines.hpp"
#include "msdbn/hmm.hpp"
#include "msdbn/lds.hpp"
#include "msdbn/variational.hpp"
#include "oracles.hpp"

using namespace msdbn;

TEST_CASE("compute_u multiplies the marginals through D") {
  Rng rng(10);
  ModelParams p = oracle::random_model(3, 2, 4, 10);
  std::vector<Vec> gammas;
  for (int t = 0; t < 5; ++t)
    gammas.push_back(oracle::random_distribution(4, rng));
  auto u = compute_u(p.D, gammas);
  REQUIRE(u.size() == gammas.size());
  for (int t = 0; t < 5; ++t)
    CHECK((u[t] - p.D * gammas[t]).norm() < 1e-14);
}

TEST_CASE("compute_log_q matches the per-state formula") {
  ModelParams p = oracle::random_model(2, 2, 3, 20);
  Rng rng(21);
  std::vector<Vec> x_mean;
  for (int t = 0; t < 4; ++t) {
    Vec x(2);
    x << rng.normal(), rng.normal();
    x_mean.push_back(x);
  }
  auto log_q = compute_log_q(p, x_mean);

  Mat qi = p.Q.inverse();
  for (int t = 0; t < 4; ++t) {
    Vec m = (t == 0) ? x_mean[0] : Vec(x_mean[t] - p.A * x_mean[t - 1]);
    for (int i = 0; i < 3; ++i) {
      double want = p.D.col(i).dot(qi * (m - 0.5 * p.D.col(i)));
      CHECK(log_q[t](i) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("a zero input column gets zero soft evidence") {
  ModelParams p = oracle::random_model(2, 1, 2, 30);
  p.D.col(1).setZero();
  std::vector<Vec> x_mean = {Vec::Zero(2), Vec::Ones(2)};
  auto log_q = compute_log_q(p, x_mean);
  CHECK(log_q[0](1) == 0.0);
  CHECK(log_q[1](1) == 0.0);
}

TEST_CASE("soft evidence favors the input nearest the innovation") {
  // Scalar chain, unit everything: state i is preferred exactly when d_i is
  // closer to the observed state innovation.
  ModelParams p = oracle::random_model(1, 1, 2, 40);
  p.A = Mat::Constant(1, 1, 1.0);
  p.Q = Mat::Constant(1, 1, 1.0);
  p.D(0, 0) = -1.0;
  p.D(0, 1) = 1.0;
  for (double innov : {-2.0, -0.4, 0.4, 2.0}) {
    std::vector<Vec> x_mean = {Vec::Zero(1), Vec::Constant(1, innov)};
    auto log_q = compute_log_q(p, x_mean);
    int argmax = log_q[1](0) >= log_q[1](1) ? 0 : 1;
    CHECK(argmax == (innov < 0.0 ? 0 : 1));
  }
}

TEST_CASE("bound equals the evidence-route expression for arbitrary q and u") {
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + trial % 3;
    int m = 1 + trial % 2;
    int s = 2 + trial % 2;
    int t_len = 2 + trial % 4;
    ModelParams p = oracle::random_model(n, m, s, 5000 + trial);
    auto [y, lat] = sample(p, t_len, 6000 + trial);

    Rng rng(7000 + trial);
    auto log_q = oracle::random_log_evidence(t_len, s, rng);
    auto u = oracle::random_inputs(t_len, n, rng);

    SmootherResult smoother = rts_smooth(p, y, u);
    HmmPosterior hmm_post = forward_backward(p.Pi, p.pi0, log_q);
    double bound = free_energy_bound(p, y, smoother, hmm_post);
    double want = oracle::dual_route_bound(
        p, smoother.log_likelihood, hmm_post.log_evidence, smoother.means,
        hmm_post.gammas, log_q, u);
    CHECK(bound == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("single switch state: bound equals the exact log evidence") {
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams p = oracle::random_model(2, 2, 1, 8000 + trial);
    auto [y, lat] = sample(p, 6, 8100 + trial);
    auto [state, stats] = e_step(p, y);

    std::vector<Vec> u(6, p.D.col(0));
    SmootherResult exact = rts_smooth(p, y, u);
    CHECK(stats.bound == doctest::Approx(exact.log_likelihood).epsilon(1e-8));
    CHECK(state.iterations == 1);  // nothing to iterate over
    CHECK(state.converged);
  }
}

TEST_CASE("bound never exceeds the enumerated log evidence") {
  for (int trial = 0; trial < 20; ++trial) {
    int s = 2;
    int t_len = 2 + trial % 5;  // S^T <= 64
    ModelParams p = oracle::random_model(1 + trial % 2, 1, s, 9000 + trial);
    auto [y, lat] = sample(p, t_len, 9100 + trial);

    auto [state, stats] = e_step(p, y, std::nullopt, 1e-10, 200);
    PathPosterior exact = exact_posterior(p, y);
    CHECK(stats.bound <= exact.log_evidence + 1e-8);
  }
}

TEST_CASE("bound trace is nondecreasing") {
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + trial % 3;
    int m = 1 + trial % 3;
    int s = 2 + trial % 2;
    int t_len = 2 + trial % 7;
    ModelParams p = oracle::random_model(n, m, s, 10000 + trial);
    auto [y, lat] = sample(p, t_len, 10100 + trial);

    auto [state, stats] = e_step(p, y, std::nullopt, 0.0, 25);
    REQUIRE(!state.bound_trace.empty());
    for (std::size_t i = 1; i < state.bound_trace.size(); ++i)
      CHECK(state.bound_trace[i] >= state.bound_trace[i - 1] - 1e-9);
  }
}

TEST_CASE("the returned state is a self-consistent fixed point") {
  ModelParams p = oracle::random_model(2, 2, 2, 11000);
  auto [y, lat] = sample(p, 6, 11100);
  auto [state, stats] = e_step(p, y, std::nullopt, 1e-12, 500);
  REQUIRE(state.converged);

  // One more full sweep starting from the returned q must stay put.
  auto log_q = compute_log_q(p, stats.x_mean);
  HmmPosterior hmm_post = forward_backward(p.Pi, p.pi0, log_q);
  auto u = compute_u(p.D, hmm_post.gammas);
  for (int t = 0; t < 6; ++t)
    CHECK((u[t] - state.u[t]).lpNorm<Eigen::Infinity>() < 1e-4);
  SmootherResult smoother = rts_smooth(p, y, u);
  double bound = free_energy_bound(p, y, smoother, hmm_post);
  CHECK(bound == doctest::Approx(stats.bound).epsilon(1e-9));
}

TEST_CASE("initializations converge to the same two-state answer") {
  ModelParams p = twostate_model(1.0, 0.5, 0.0);
  SequenceData y = twostate_observations();

  auto [base_state, base] = e_step(p, y, std::nullopt, 1e-12, 500);
  // The generating sequence is -1, -1, -1: state 0 throughout.
  for (int t = 0; t < 3; ++t) CHECK(base.s_mean[t](0) > 0.5);

  VariationalState init;
  init.log_q.assign(3, Vec::Zero(2));
  auto [zero_state, zero] = e_step(p, y, init, 1e-12, 500);
  CHECK(zero.bound == doctest::Approx(base.bound).epsilon(1e-8));

  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    VariationalState start;
    start.log_q = oracle::random_log_evidence(3, 2, rng, 3.0);
    auto [st, stats] = e_step(p, y, start, 1e-12, 500);
    for (int t = 0; t < 3; ++t) CHECK(stats.s_mean[t](0) > 0.5);
  }
}

TEST_CASE("posterior statistics assemble moments correctly") {
  ModelParams p = oracle::random_model(2, 1, 2, 12000);
  auto [y, lat] = sample(p, 4, 12100);
  auto [state, stats] = e_step(p, y, std::nullopt, 1e-6, 100);

  SmootherResult smoother = rts_smooth(p, y, state.u);
  for (int t = 0; t < 4; ++t) {
    Mat second =
        smoother.covs[t] + smoother.means[t] * smoother.means[t].transpose();
    CHECK((stats.x_second_moment[t] - second).norm() < 1e-9);
    if (t > 0) {
      Mat cross = smoother.cross_covs[t - 1] +
                  smoother.means[t] * smoother.means[t - 1].transpose();
      CHECK((stats.x_cross_moment[t - 1] - cross).norm() < 1e-9);
    }
    CHECK(stats.s_mean[t].sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("e_step rejects bad inputs") {
  ModelParams p = oracle::random_model(1, 1, 2, 13000);
  SequenceData empty;
  CHECK_THROWS_AS(e_step(p, empty), std::invalid_argument);

  auto [y, lat] = sample(p, 3, 13100);
  CHECK_THROWS_AS(e_step(p, y, std::nullopt, 1e-3, 0), std::invalid_argument);

  VariationalState bad;
  bad.log_q.assign(2, Vec::Zero(2));  // wrong length
  CHECK_THROWS_AS(e_step(p, y, bad), std::invalid_argument);
}
