#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "msdbn/model.hpp"
#include "oracles.hpp"

using namespace msdbn;

namespace {

ModelParams scalar_model(double a, double c, double q, double r) {
  ModelParams p;
  p.state_dim = 1;
  p.obs_dim = 1;
  p.num_states = 1;
  p.A = Mat::Constant(1, 1, a);
  p.C = Mat::Constant(1, 1, c);
  p.D = Mat::Zero(1, 1);
  p.Q = Mat::Constant(1, 1, q);
  p.R = Mat::Constant(1, 1, r);
  p.Pi = Mat::Constant(1, 1, 1.0);
  p.pi0 = Vec::Constant(1, 1.0);
  return p;
}

bool throws_naming(const ModelParams& p, const std::string& field) {
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    return std::string(e.what()).find(field) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("validate accepts random models") {
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = oracle::random_model(2 + trial % 3, 1 + trial % 2,
                                         1 + trial % 4, 100 + trial);
    CHECK_NOTHROW(validate(p));
  }
}

TEST_CASE("validate names the offending field") {
  ModelParams good = oracle::random_model(3, 2, 2, 7);

  ModelParams p = good;
  p.A = Mat::Zero(2, 3);
  CHECK(throws_naming(p, "A"));

  p = good;
  p.C = Mat::Zero(2, 2);
  CHECK(throws_naming(p, "C"));

  p = good;
  p.D = Mat::Zero(3, 3);
  CHECK(throws_naming(p, "D"));

  p = good;
  p.Q(0, 1) += 1e-3;  // asymmetric
  CHECK(throws_naming(p, "Q"));

  p = good;
  p.Q = -Mat::Identity(3, 3);
  CHECK(throws_naming(p, "Q"));

  p = good;
  p.R = Mat::Zero(2, 2);  // positive semi-definite only
  CHECK(throws_naming(p, "R"));

  p = good;
  p.Pi(0, 0) += 0.5;  // column no longer sums to one
  CHECK(throws_naming(p, "Pi"));

  p = good;
  p.Pi(0, 0) = -p.Pi(0, 0);
  p.Pi(1, 0) = 1.0 - p.Pi(0, 0);
  CHECK(throws_naming(p, "Pi"));

  p = good;
  p.pi0(0) += 0.25;
  CHECK(throws_naming(p, "pi0"));

  p = good;
  p.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(throws_naming(p, "A"));

  p = good;
  p.state_dim = 0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("sample is deterministic in the seed and consistent in shape") {
  ModelParams p = oracle::random_model(2, 2, 3, 11);
  auto [seq1, lat1] = sample(p, 17, 99);
  auto [seq2, lat2] = sample(p, 17, 99);
  auto [seq3, lat3] = sample(p, 17, 100);

  REQUIRE(seq1.length() == 17);
  REQUIRE(static_cast<int>(lat1.states.size()) == 17);
  REQUIRE(static_cast<int>(lat1.x.size()) == 17);
  CHECK(seq1.true_states == lat1.states);

  bool same = true, differs = false;
  for (int t = 0; t < 17; ++t) {
    same = same && (seq1.y[t] - seq2.y[t]).norm() == 0.0 &&
           lat1.states[t] == lat2.states[t];
    differs = differs || (seq1.y[t] - seq3.y[t]).norm() > 0.0;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("noise-free sampling follows the deterministic recursion") {
  ModelParams p = oracle::random_model(3, 2, 2, 21);
  p.Q = 1e-18 * Mat::Identity(3, 3);
  p.R = 1e-18 * Mat::Identity(2, 2);
  auto [seq, lat] = sample(p, 12, 5);

  Vec x = p.D.col(lat.states[0]);
  CHECK((lat.x[0] - x).norm() < 1e-6);
  for (int t = 1; t < 12; ++t) {
    x = p.A * x + p.D.col(lat.states[t]);
    CHECK((lat.x[t] - x).norm() < 1e-6);
    CHECK((seq.y[t] - p.C * lat.x[t]).norm() < 1e-6);
  }
}

TEST_CASE("sampled observation noise matches R in moments") {
  ModelParams p = scalar_model(0.0, 1.0, 1e-18, 2.25);
  p.D = Mat::Zero(1, 1);

  const int T = 100000;
  auto [seq, lat] = sample(p, T, 4242);
  double mean = 0.0, second = 0.0;
  for (int t = 0; t < T; ++t) {
    double w = seq.y[t](0) - lat.x[t](0);
    mean += w;
    second += w * w;
  }
  mean /= T;
  second /= T;
  CHECK(std::abs(mean) < 0.05);              // sd/sqrt(T) ~ 0.005
  CHECK(std::abs(second - 2.25) < 0.1125);   // within 5%
}

TEST_CASE("sampled chain visits states at stationary frequencies") {
  ModelParams p = oracle::random_model(1, 1, 2, 33);
  p.Pi << 0.9, 0.3,
          0.1, 0.7;  // stationary distribution (0.75, 0.25)
  p.pi0 << 0.75, 0.25;
  const int T = 50000;
  auto [seq, lat] = sample(p, T, 7);
  double frac = 0.0;
  for (int s : lat.states) frac += (s == 0) ? 1.0 : 0.0;
  frac /= T;
  CHECK(std::abs(frac - 0.75) < 0.02);
}

TEST_CASE("joint energy of the all-zero scalar configuration") {
  ModelParams p = scalar_model(1.0, 1.0, 1.0, 1.0);
  SequenceData seq;
  seq.y = {Vec::Zero(1)};
  std::vector<Vec> x = {Vec::Zero(1)};
  std::vector<int> s = {0};
  // Both Gaussian terms contribute (1/2) log 2 pi and nothing else.
  CHECK(joint_energy(p, x, s, seq) ==
        doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("joint energy equals the negative dense log joint") {
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = oracle::random_model(2, 2, 3, 500 + trial);
    const int T = 4;
    auto [seq, lat] = sample(p, T, 900 + trial);

    // log p(x | s) p(y | x) via the chain rule of Gaussians, plus the chain.
    double log_joint = 0.0;
    for (int t = 0; t < T; ++t) {
      Vec mean = p.D.col(lat.states[t]);
      if (t > 0) mean += p.A * lat.x[t - 1];
      log_joint += oracle::log_gaussian_dense(lat.x[t], mean, p.Q);
      log_joint += oracle::log_gaussian_dense(seq.y[t], p.C * lat.x[t], p.R);
    }
    log_joint += std::log(p.pi0(lat.states[0]));
    for (int t = 1; t < T; ++t)
      log_joint += std::log(p.Pi(lat.states[t], lat.states[t - 1]));

    double energy = joint_energy(p, lat.x, lat.states, seq);
    CHECK(energy == doctest::Approx(-log_joint).epsilon(1e-10));
  }
}

TEST_CASE("joint energy is infinite across a forbidden transition") {
  ModelParams p = oracle::random_model(1, 1, 2, 61);
  p.Pi << 1.0, 0.0,
          0.0, 1.0;  // no switching allowed
  p.pi0 << 1.0, 0.0;

  SequenceData seq;
  seq.y = {Vec::Zero(1), Vec::Zero(1)};
  std::vector<Vec> x = {Vec::Zero(1), Vec::Zero(1)};

  CHECK(std::isinf(joint_energy(p, x, {0, 1}, seq)));
  CHECK(std::isinf(joint_energy(p, x, {1, 1}, seq)));  // forbidden start
  CHECK(std::isfinite(joint_energy(p, x, {0, 0}, seq)));
}

TEST_CASE("joint energy decreases as x approaches the noiseless trajectory") {
  ModelParams p = oracle::random_model(2, 2, 2, 71);
  auto [seq, lat] = sample(p, 6, 3);

  // Pull x toward the input-driven mean trajectory; energy must not rise.
  std::vector<Vec> mean_x(6);
  for (int t = 0; t < 6; ++t) {
    mean_x[t] = p.D.col(lat.states[t]);
    if (t > 0) mean_x[t] += p.A * mean_x[t - 1];
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double w : {0.0, 0.5, 1.0}) {
    std::vector<Vec> x(6);
    for (int t = 0; t < 6; ++t) {
      x[t] = w * mean_x[t] + (1.0 - w) * lat.x[t];
      // keep observation residuals fixed so only the state terms move
    }
    SequenceData shifted;
    for (int t = 0; t < 6; ++t)
      shifted.y.push_back(seq.y[t] + p.C * (x[t] - lat.x[t]));
    double e = joint_energy(p, x, lat.states, shifted);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
}

TEST_CASE("joint energy validates lengths") {
  ModelParams p = oracle::random_model(1, 1, 1, 81);
  SequenceData seq;
  seq.y = {Vec::Zero(1), Vec::Zero(1)};
  std::vector<Vec> x = {Vec::Zero(1)};
  CHECK_THROWS_AS(joint_energy(p, x, {0, 0}, seq), std::invalid_argument);
}
