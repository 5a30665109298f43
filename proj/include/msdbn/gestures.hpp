#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdbn/learning.hpp"
#include "msdbn/model.hpp"
#include "msdbn/parallel.hpp"

namespace msdbn {

// --- Synthetic gesture classes --------------------------------------------

// A gesture is a left-to-right sequence of acceleration segments in the
// plane. Column i of `stroke_accelerations` is the nominal acceleration
// applied while the chain sits in state i.
struct GestureSpec {
  std::string class_name;
  int num_hmm_states = 0;
  Mat stroke_accelerations;  // 2 x num_hmm_states
  double dwell = 8.0;        // mean steps spent in each state
  double dt = 0.1;
};

// Planar point mass sampled at dt: state (px, py, vx, vy), position
// observations, isotropic process and observation noise, left-to-right
// transitions with self-loop probability 1 - 1/dwell (the last state
// absorbs), and all inputs zero.
ModelParams point_mass_model(double dt, double q_scale, double r_scale,
                             int num_states, double dwell = 8.0);

// point_mass_model with input columns d_i = (0, 0, ax_i dt, ay_i dt).
ModelParams gesture_model(const GestureSpec& spec, double q_scale,
                          double r_scale);

// Four classes: arrow (8 states), erase (6), circle (4), wiggle (6).
std::vector<GestureSpec> default_gesture_specs();

// --- Dataset ---------------------------------------------------------------

struct GestureDataset {
  std::vector<std::string> class_names;
  std::vector<SequenceData> sequences;  // class-major order
  std::vector<int> labels;
  double dt = 0.1;
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Samples each class's model, keeps the noise-free position track, applies a
// random rotation, re-aligns the first stroke's displacement with +x, scales
// each axis into [0, 1], and finally adds isotropic observation noise (none
// when noise_sd is 0). Lengths vary by +/- 15% around num_states * dwell.
// Deterministic given the seed. q_scale is the process noise of the
// generating models.
GestureDataset generate_dataset(const std::vector<GestureSpec>& specs,
                                int per_class, double noise_sd,
                                std::uint64_t seed, double q_scale = 1e-4);

// Deterministic contiguous fold assignment computed independently per class:
// example i of a class with n examples goes to min(i / (n / folds),
// folds - 1).
std::vector<int> assign_folds(const std::vector<int>& labels, int num_classes,
                              int folds);

// --- Classification ---------------------------------------------------------

struct ClassifyOutcome {
  int predicted = 0;
  std::vector<double> scores;            // variational bound per class
  std::vector<int> e_step_iterations;    // fixed-point sweeps per class
};

// Scores a sequence under every class model with the variational lower bound
// on log p(y); ties go to the lower class index. cfg supplies the E-step
// tolerance and iteration cap. Each class runs the E-step from two
// deterministic starts (the default prior-seeded one and one seeded from an
// input-free smoothing pass) and keeps the better bound; the reported
// iteration count belongs to the kept run.
ClassifyOutcome classify(const std::vector<ModelParams>& class_models,
                         const SequenceData& y, const TrainConfig& cfg = {});

// --- Trainers ----------------------------------------------------------------

// Coupled trainer for one class: point-mass dynamics with A and C frozen,
// input columns initialized from per-segment means of second-difference
// accelerations of the training tracks, then variational EM.
ModelParams train_coupled_model(const std::vector<SequenceData>& train,
                                int num_states, double dt,
                                const TrainConfig& cfg = {});

// Gradient baseline: a Gaussian-emission left-to-right HMM fitted to
// second-difference acceleration estimates.
struct InputHmm {
  Mat means;  // 2 x num_states
  Mat vars;   // 2 x num_states, diagonal emission variances
  Mat Pi;
  Vec pi0;
  double dt = 0.1;
};

InputHmm train_input_hmm(const std::vector<SequenceData>& train,
                         int num_states, double dt, int iters = 15);

// log p(estimated accelerations | hmm).
double input_hmm_log_likelihood(const InputHmm& hmm, const SequenceData& y);

// --- Cross validation --------------------------------------------------------

struct CrossValResult {
  Mat confusion;                        // rows true class, columns predicted
  std::vector<double> fold_error;       // overall error per fold
  std::vector<double> class_error;      // mean of per-fold class errors
  std::vector<double> class_error_var;  // variance of that mean
  double overall_error = 0.0;
};

// K-fold cross validation with per-class trainers. The trainer receives the
// training sequences of one class plus the class index; the classifier maps
// the trained models and a test sequence to a predicted class.
template <typename ModelT>
CrossValResult cross_validate(
    const GestureDataset& data, int folds,
    const std::function<ModelT(const std::vector<SequenceData>&, int)>&
        trainer,
    const std::function<int(const std::vector<ModelT>&, const SequenceData&)>&
        classifier) {
  const int num_classes = data.num_classes();
  const int n = static_cast<int>(data.sequences.size());
  if (folds < 2) throw std::invalid_argument("cross_validate: folds < 2");
  std::vector<int> fold_of = assign_folds(data.labels, num_classes, folds);

  CrossValResult result;
  result.confusion = Mat::Zero(num_classes, num_classes);
  result.fold_error.assign(folds, 0.0);
  result.class_error.assign(num_classes, 0.0);
  result.class_error_var.assign(num_classes, 0.0);
  // per fold, per class error rates
  std::vector<std::vector<double>> fold_class_error(
      folds, std::vector<double>(num_classes, 0.0));

  long total_mistakes = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<ModelT> models(num_classes);
    parallel_for(num_classes, [&](int c) {
      std::vector<SequenceData> train;
      for (int i = 0; i < n; ++i)
        if (data.labels[i] == c && fold_of[i] != f)
          train.push_back(data.sequences[i]);
      if (train.empty())
        throw std::runtime_error("cross_validate: class " + std::to_string(c) +
                                 " has no training data in fold " +
                                 std::to_string(f));
      models[c] = trainer(train, c);
    });

    std::vector<int> test_idx;
    for (int i = 0; i < n; ++i)
      if (fold_of[i] == f) test_idx.push_back(i);
    if (test_idx.empty())
      throw std::runtime_error("cross_validate: fold " + std::to_string(f) +
                               " is empty");
    std::vector<int> predicted(test_idx.size());
    parallel_for(static_cast<int>(test_idx.size()), [&](int k) {
      predicted[k] = classifier(models, data.sequences[test_idx[k]]);
    });

    std::vector<int> class_total(num_classes, 0), class_wrong(num_classes, 0);
    int fold_wrong = 0;
    for (std::size_t k = 0; k < test_idx.size(); ++k) {
      int truth = data.labels[test_idx[k]];
      result.confusion(truth, predicted[k]) += 1.0;
      ++class_total[truth];
      if (predicted[k] != truth) {
        ++class_wrong[truth];
        ++fold_wrong;
        ++total_mistakes;
      }
    }
    result.fold_error[f] =
        static_cast<double>(fold_wrong) / static_cast<double>(test_idx.size());
    for (int c = 0; c < num_classes; ++c) {
      if (class_total[c] == 0)
        throw std::runtime_error("cross_validate: class " + std::to_string(c) +
                                 " has no test data in fold " +
                                 std::to_string(f));
      fold_class_error[f][c] = static_cast<double>(class_wrong[c]) /
                               static_cast<double>(class_total[c]);
    }
  }

  for (int c = 0; c < num_classes; ++c) {
    double mean = 0.0;
    for (int f = 0; f < folds; ++f) mean += fold_class_error[f][c];
    mean /= folds;
    double var = 0.0;
    for (int f = 0; f < folds; ++f) {
      double d = fold_class_error[f][c] - mean;
      var += d * d;
    }
    var /= (folds - 1);          // sample variance across folds
    result.class_error[c] = mean;
    result.class_error_var[c] = var / folds;  // variance of the fold mean
  }
  result.overall_error = static_cast<double>(total_mistakes) / n;
  return result;
}

// --- Benchmark ----------------------------------------------------------------

struct BenchConfig {
  int per_class = 50;
  double noise_sd = 0.01;
  std::uint64_t seed = 42;
  int folds = 4;
  TrainConfig train;
};

struct BenchResult {
  std::vector<std::string> class_names;
  CrossValResult coupled;
  CrossValResult gradient;
  std::vector<int> e_step_iterations;  // one entry per (test sequence, class)
  double median_e_step_iterations = 0.0;
};

// Runs both classifiers on one generated dataset under identical folds.
BenchResult run_gesture_benchmark(const BenchConfig& cfg);

}  // namespace msdbn
