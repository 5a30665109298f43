#include "msdbn/gestures.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "msdbn/baselines.hpp"
#include "msdbn/hmm.hpp"
#include "msdbn/lds.hpp"
#include "msdbn/rng.hpp"
#include "msdbn/variational.hpp"

namespace msdbn {

namespace {

Mat positions_of(const SequenceData& seq) {
  Mat p(seq.length(), 2);
  for (int t = 0; t < seq.length(); ++t) p.row(t) = seq.y[t].head(2);
  return p;
}

// Mean of the second-difference accelerations over equal-length segments,
// pooled over sequences; the crude per-state input guess that seeds both
// trainers.
Mat segment_mean_accelerations(const std::vector<SequenceData>& seqs,
                               int num_states, double dt) {
  Mat sums = Mat::Zero(2, num_states);
  Vec counts = Vec::Zero(num_states);
  for (const SequenceData& seq : seqs) {
    const int T = seq.length();
    Mat acc = gradient_input_estimate(positions_of(seq), dt);
    for (int t = 0; t < T; ++t) {
      int s = std::min(t * num_states / T, num_states - 1);
      sums.col(s) += acc.row(t).transpose();
      counts(s) += 1.0;
    }
  }
  for (int s = 0; s < num_states; ++s)
    if (counts(s) > 0.0) sums.col(s) /= counts(s);
  return sums;
}

Mat left_to_right(int num_states, double dwell) {
  if (dwell <= 1.0)
    throw std::invalid_argument("left_to_right: dwell must exceed 1");
  Mat pi = Mat::Zero(num_states, num_states);
  double stay = 1.0 - 1.0 / dwell;
  for (int j = 0; j + 1 < num_states; ++j) {
    pi(j, j) = stay;
    pi(j + 1, j) = 1.0 - stay;
  }
  pi(num_states - 1, num_states - 1) = 1.0;
  return pi;
}

// The point-mass prior anchors the initial position at the origin (D has
// zero position rows and Q doubles as the x_0 covariance), so the harness
// fits and scores every trajectory in start-centered coordinates.
SequenceData recenter(const SequenceData& seq) {
  SequenceData out = seq;
  if (!out.y.empty()) {
    Vec origin = out.y.front();
    for (Vec& y : out.y) y -= origin;
  }
  return out;
}

}  // namespace

ModelParams point_mass_model(double dt, double q_scale, double r_scale,
                             int num_states, double dwell) {
  if (num_states < 1)
    throw std::invalid_argument("point_mass_model: num_states < 1");
  ModelParams params;
  params.state_dim = 4;  // px, py, vx, vy
  params.obs_dim = 2;
  params.num_states = num_states;
  params.A = Mat::Identity(4, 4);
  params.A(0, 2) = dt;
  params.A(1, 3) = dt;
  params.C = Mat::Zero(2, 4);
  params.C(0, 0) = 1.0;
  params.C(1, 1) = 1.0;
  params.D = Mat::Zero(4, num_states);
  params.Q = q_scale * Mat::Identity(4, 4);
  params.R = r_scale * Mat::Identity(2, 2);
  params.Pi = num_states == 1 ? Mat::Constant(1, 1, 1.0)
                              : left_to_right(num_states, dwell);
  params.pi0 = Vec::Zero(num_states);
  params.pi0(0) = 1.0;
  return params;
}

ModelParams gesture_model(const GestureSpec& spec, double q_scale,
                          double r_scale) {
  if (spec.num_hmm_states != spec.stroke_accelerations.cols())
    throw std::invalid_argument(
        "gesture_model: num_hmm_states does not match stroke_accelerations");
  const int s = spec.num_hmm_states;
  ModelParams params =
      point_mass_model(spec.dt, q_scale, r_scale, s, spec.dwell);
  for (int i = 0; i < s; ++i) {
    params.D(2, i) = spec.stroke_accelerations(0, i) * spec.dt;
    params.D(3, i) = spec.stroke_accelerations(1, i) * spec.dt;
  }
  return params;
}

std::vector<GestureSpec> default_gesture_specs() {
  auto strokes = [](std::initializer_list<std::pair<double, double>> dirs) {
    // one accelerate/decelerate state pair per stroke
    Mat acc(2, 2 * dirs.size());
    int col = 0;
    for (auto [x, y] : dirs) {
      acc.col(col++) = Vec{{x, y}};
      acc.col(col++) = Vec{{-x, -y}};
    }
    return acc;
  };
  auto make = [](std::string name, Mat acc) {
    GestureSpec spec;
    spec.class_name = std::move(name);
    spec.num_hmm_states = static_cast<int>(acc.cols());
    spec.stroke_accelerations = std::move(acc);
    return spec;
  };

  std::vector<GestureSpec> specs;
  // shaft, then the two barbs of the head drawn tip-out-tip
  specs.push_back(make("arrow", strokes({{1.0, 0.0},
                                         {-0.7, 0.7},
                                         {0.7, -0.7},
                                         {-0.7, -0.7}})));
  // scrubbing strokes that creep upward
  specs.push_back(
      make("erase", strokes({{1.0, 0.0}, {-0.95, 0.3}, {0.9, 0.25}})));
  // rotating centripetal acceleration
  Mat circle(2, 4);
  circle << 1.0, 0.0, -1.0, 0.0,
            0.0, 1.0, 0.0, -1.0;
  specs.push_back(make("circle", std::move(circle)));
  // vertical oscillation with a slow rightward drift
  Mat wiggle(2, 6);
  for (int i = 0; i < 6; ++i) {
    wiggle(0, i) = 0.4;
    wiggle(1, i) = (i % 2 == 0) ? 1.0 : -1.0;
  }
  specs.push_back(make("wiggle", std::move(wiggle)));
  return specs;
}

GestureDataset generate_dataset(const std::vector<GestureSpec>& specs,
                                int per_class, double noise_sd,
                                std::uint64_t seed, double q_scale) {
  if (specs.empty())
    throw std::invalid_argument("generate_dataset: no gesture classes");
  if (per_class < 1)
    throw std::invalid_argument("generate_dataset: per_class < 1");
  for (const GestureSpec& spec : specs)
    if (spec.dt != specs.front().dt)
      throw std::invalid_argument("generate_dataset: inconsistent dt");

  GestureDataset data;
  data.dt = specs.front().dt;
  const double q_sd = std::sqrt(q_scale);

  for (int c = 0; c < static_cast<int>(specs.size()); ++c) {
    const GestureSpec& spec = specs[c];
    data.class_names.push_back(spec.class_name);
    ModelParams model = gesture_model(spec, q_scale, 1e-12);
    const int s = model.num_states;

    for (int e = 0; e < per_class; ++e) {
      long g = static_cast<long>(c) * per_class + e;
      Rng rng(mix_seed(seed, 2 * g));

      // Stochastic left-to-right dwell: every state holds for its nominal
      // duration jittered by up to 20%, at least two steps.
      std::vector<int> durations(s);
      int T = 0;
      for (int i = 0; i < s; ++i) {
        durations[i] = std::max(
            2, static_cast<int>(
                   std::lround(spec.dwell * (0.8 + 0.4 * rng.uniform()))));
        T += durations[i];
      }
      std::vector<int> states;
      states.reserve(T);
      for (int i = 0; i < s; ++i) states.insert(states.end(), durations[i], i);

      // Continuous chain along the planned switch path.
      Mat pos(T, 2);
      Vec x = model.D.col(0);
      for (int d = 0; d < 4; ++d) x(d) += q_sd * rng.normal();
      pos.row(0) = x.head(2).transpose();
      for (int t = 1; t < T; ++t) {
        x = model.A * x + model.D.col(states[t]);
        for (int d = 0; d < 4; ++d) x(d) += q_sd * rng.normal();
        pos.row(t) = x.head(2).transpose();
      }

      double theta = 2.0 * std::numbers::pi * rng.uniform();
      Mat rot(2, 2);
      rot << std::cos(theta), -std::sin(theta),
             std::sin(theta), std::cos(theta);
      pos = pos * rot.transpose();

      // Directional alignment: rotate the opening stroke onto +x. From rest
      // the displacement under the first state's constant acceleration runs
      // exactly along it, so the first state's window measures the angle.
      int k = std::min(T - 1, durations[0]);
      Vec disp = (pos.row(k) - pos.row(0)).transpose();
      double phi = std::atan2(disp(1), disp(0));
      Mat undo(2, 2);
      undo << std::cos(-phi), -std::sin(-phi),
              std::sin(-phi), std::cos(-phi);
      pos = pos * undo.transpose();

      for (int d = 0; d < 2; ++d) {
        double lo = pos.col(d).minCoeff();
        double range = std::max(pos.col(d).maxCoeff() - lo, 1e-9);
        pos.col(d) = (pos.col(d).array() - lo) / range;
      }

      SequenceData seq;
      seq.y.reserve(T);
      for (int t = 0; t < T; ++t) seq.y.push_back(pos.row(t).transpose());
      if (noise_sd > 0.0)
        for (int t = 0; t < T; ++t)
          for (int d = 0; d < 2; ++d) seq.y[t](d) += noise_sd * rng.normal();
      seq.true_states = std::move(states);
      data.sequences.push_back(std::move(seq));
      data.labels.push_back(c);
    }
  }
  return data;
}

std::vector<int> assign_folds(const std::vector<int>& labels, int num_classes,
                              int folds) {
  std::vector<int> per_class(num_classes, 0);
  for (int label : labels) {
    if (label < 0 || label >= num_classes)
      throw std::invalid_argument("assign_folds: label out of range");
    ++per_class[label];
  }
  for (int c = 0; c < num_classes; ++c)
    if (per_class[c] < folds)
      throw std::invalid_argument(
          "assign_folds: class " + std::to_string(c) +
          " has fewer examples than folds");

  std::vector<int> out(labels.size());
  std::vector<int> seen(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int c = labels[i];
    int base = per_class[c] / folds;
    out[i] = std::min(seen[c]++ / base, folds - 1);
  }
  return out;
}

ClassifyOutcome classify(const std::vector<ModelParams>& class_models,
                         const SequenceData& y, const TrainConfig& cfg) {
  if (class_models.empty())
    throw std::invalid_argument("classify: no class models");
  SequenceData centered = recenter(y);
  ClassifyOutcome outcome;
  for (const ModelParams& model : class_models) {
    auto [state, stats] =
        e_step(model, centered, std::nullopt, cfg.e_tol, cfg.e_max_iter);
    double score = stats.bound;
    int iterations = state.iterations;

    // Second deterministic start seeded from an input-free smoothing pass.
    // The default start trusts the prior's switch times; this one trusts the
    // observed trajectory instead, which rescues the fixed point when the
    // actual dwell pattern is far from nominal. Either run's bound is a
    // valid lower bound on log p(y), so the better one is the score.
    std::vector<Vec> zero_u(centered.y.size(), Vec::Zero(model.A.rows()));
    VariationalState seeded;
    seeded.log_q = compute_log_q(model, rts_smooth(model, centered, zero_u).means);
    auto [state2, stats2] =
        e_step(model, centered, seeded, cfg.e_tol, cfg.e_max_iter);
    if (stats2.bound > score) {
      score = stats2.bound;
      iterations = state2.iterations;
    }

    outcome.scores.push_back(score);
    outcome.e_step_iterations.push_back(iterations);
  }
  for (std::size_t c = 1; c < outcome.scores.size(); ++c)
    if (outcome.scores[c] > outcome.scores[outcome.predicted])
      outcome.predicted = static_cast<int>(c);
  return outcome;
}

ModelParams train_coupled_model(const std::vector<SequenceData>& train,
                                int num_states, double dt,
                                const TrainConfig& cfg) {
  if (train.empty())
    throw std::invalid_argument("train_coupled_model: no sequences");
  std::vector<SequenceData> centered;
  centered.reserve(train.size());
  for (const SequenceData& seq : train) centered.push_back(recenter(seq));

  ModelParams init = point_mass_model(dt, 1e-2, 1e-4, num_states);
  Mat acc = segment_mean_accelerations(centered, num_states, dt);
  for (int s = 0; s < num_states; ++s) {
    init.D(2, s) = acc(0, s) * dt;
    init.D(3, s) = acc(1, s) * dt;
  }
  TrainConfig local = cfg;
  local.update.A = false;  // dynamics and readout are known kinematics
  local.update.C = false;
  return em_train(centered, init, local).first;
}

InputHmm train_input_hmm(const std::vector<SequenceData>& train,
                         int num_states, double dt, int iters) {
  if (train.empty())
    throw std::invalid_argument("train_input_hmm: no sequences");
  constexpr double kVarFloor = 1e-6;

  std::vector<Mat> acc;
  acc.reserve(train.size());
  long total_steps = 0;
  for (const SequenceData& seq : train) {
    acc.push_back(gradient_input_estimate(positions_of(seq), dt));
    total_steps += seq.length();
  }

  InputHmm hmm;
  hmm.dt = dt;
  hmm.means = segment_mean_accelerations(train, num_states, dt);
  double dwell =
      std::max(2.0, static_cast<double>(total_steps) /
                        (static_cast<double>(train.size()) * num_states));
  hmm.Pi = num_states == 1 ? Mat::Constant(1, 1, 1.0)
                           : left_to_right(num_states, dwell);
  hmm.pi0 = Vec::Zero(num_states);
  hmm.pi0(0) = 1.0;

  Vec global_var = Vec::Zero(2);
  Vec global_mean = Vec::Zero(2);
  for (const Mat& a : acc) global_mean += a.colwise().sum().transpose();
  global_mean /= static_cast<double>(total_steps);
  for (const Mat& a : acc)
    global_var += (a.rowwise() - global_mean.transpose())
                      .array()
                      .square()
                      .colwise()
                      .sum()
                      .matrix()
                      .transpose();
  global_var = (global_var / static_cast<double>(total_steps))
                   .cwiseMax(kVarFloor);
  hmm.vars = global_var.replicate(1, num_states);

  for (int iter = 0; iter < iters; ++iter) {
    Mat mean_num = Mat::Zero(2, num_states);
    Mat var_num = Mat::Zero(2, num_states);
    Vec weight = Vec::Zero(num_states);
    Mat xi_sum = Mat::Zero(num_states, num_states);
    Vec head_sum = Vec::Zero(num_states);

    for (const Mat& a : acc) {
      const int T = static_cast<int>(a.rows());
      std::vector<Vec> log_e(T);
      for (int t = 0; t < T; ++t) {
        Vec le(num_states);
        for (int s = 0; s < num_states; ++s) {
          double v = 0.0;
          for (int d = 0; d < 2; ++d) {
            double diff = a(t, d) - hmm.means(d, s);
            v += std::log(2.0 * std::numbers::pi * hmm.vars(d, s)) +
                 diff * diff / hmm.vars(d, s);
          }
          le(s) = -0.5 * v;
        }
        log_e[t] = std::move(le);
      }
      HmmPosterior post = forward_backward(hmm.Pi, hmm.pi0, log_e);
      for (int t = 0; t < T; ++t) {
        mean_num += a.row(t).transpose() * post.gammas[t].transpose();
        weight += post.gammas[t];
        if (t > 0) {
          xi_sum += post.xis[t - 1];
          head_sum += post.gammas[t - 1];
        }
      }
      for (int t = 0; t < T; ++t)
        for (int s = 0; s < num_states; ++s)
          var_num.col(s) += post.gammas[t](s) *
                            (a.row(t).transpose() - hmm.means.col(s))
                                .array()
                                .square()
                                .matrix();
    }

    for (int s = 0; s < num_states; ++s) {
      if (weight(s) > 0.0) {
        hmm.means.col(s) = mean_num.col(s) / weight(s);
        hmm.vars.col(s) = (var_num.col(s) / weight(s)).cwiseMax(kVarFloor);
      }
      if (head_sum(s) > 0.0) hmm.Pi.col(s) = xi_sum.col(s) / head_sum(s);
    }
  }
  return hmm;
}

double input_hmm_log_likelihood(const InputHmm& hmm, const SequenceData& y) {
  Mat a = gradient_input_estimate(positions_of(y), hmm.dt);
  const int T = static_cast<int>(a.rows());
  const int s = static_cast<int>(hmm.means.cols());
  std::vector<Vec> log_e(T);
  for (int t = 0; t < T; ++t) {
    Vec le(s);
    for (int i = 0; i < s; ++i) {
      double v = 0.0;
      for (int d = 0; d < 2; ++d) {
        double diff = a(t, d) - hmm.means(d, i);
        v += std::log(2.0 * std::numbers::pi * hmm.vars(d, i)) +
             diff * diff / hmm.vars(d, i);
      }
      le(i) = -0.5 * v;
    }
    log_e[t] = std::move(le);
  }
  return forward_backward(hmm.Pi, hmm.pi0, log_e).log_evidence;
}

BenchResult run_gesture_benchmark(const BenchConfig& cfg) {
  std::vector<GestureSpec> specs = default_gesture_specs();
  GestureDataset data =
      generate_dataset(specs, cfg.per_class, cfg.noise_sd, cfg.seed);

  BenchResult result;
  result.class_names = data.class_names;

  std::mutex iter_mutex;
  std::function<ModelParams(const std::vector<SequenceData>&, int)>
      coupled_trainer = [&](const std::vector<SequenceData>& train, int c) {
        return train_coupled_model(train, specs[c].num_hmm_states, data.dt,
                                   cfg.train);
      };
  std::function<int(const std::vector<ModelParams>&, const SequenceData&)>
      coupled_classifier = [&](const std::vector<ModelParams>& models,
                               const SequenceData& y) {
        ClassifyOutcome outcome = classify(models, y, cfg.train);
        std::lock_guard<std::mutex> lock(iter_mutex);
        result.e_step_iterations.insert(result.e_step_iterations.end(),
                                        outcome.e_step_iterations.begin(),
                                        outcome.e_step_iterations.end());
        return outcome.predicted;
      };
  result.coupled =
      cross_validate<ModelParams>(data, cfg.folds, coupled_trainer,
                                  coupled_classifier);

  std::function<InputHmm(const std::vector<SequenceData>&, int)>
      gradient_trainer = [&](const std::vector<SequenceData>& train, int c) {
        return train_input_hmm(train, specs[c].num_hmm_states, data.dt);
      };
  std::function<int(const std::vector<InputHmm>&, const SequenceData&)>
      gradient_classifier = [](const std::vector<InputHmm>& models,
                               const SequenceData& y) {
        int best = 0;
        double best_score = input_hmm_log_likelihood(models[0], y);
        for (std::size_t c = 1; c < models.size(); ++c) {
          double score = input_hmm_log_likelihood(models[c], y);
          if (score > best_score) {
            best_score = score;
            best = static_cast<int>(c);
          }
        }
        return best;
      };
  result.gradient = cross_validate<InputHmm>(data, cfg.folds, gradient_trainer,
                                             gradient_classifier);

  std::vector<int> iters = result.e_step_iterations;
  if (!iters.empty()) {
    std::sort(iters.begin(), iters.end());
    std::size_t h = iters.size() / 2;
    result.median_e_step_iterations =
        iters.size() % 2 == 1 ? iters[h]
                              : 0.5 * (iters[h - 1] + iters[h]);
  }
  return result;
}

}  // namespace msdbn
