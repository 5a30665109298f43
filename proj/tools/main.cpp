#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msdbn/baselines.hpp"
#include "msdbn/gestures.hpp"
#include "msdbn/io.hpp"
#include "msdbn/learning.hpp"
#include "msdbn/model.hpp"
#include "msdbn/parallel.hpp"
#include "msdbn/variational.hpp"

namespace fs = std::filesystem;
using namespace msdbn;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

void write_vec_row(std::ostream& out, const Vec& v) {
  for (int i = 0; i < v.size(); ++i)
    out << (i ? "\t" : "") << format_double(v(i));
  out << "\n";
}

// Sequences named by a manifest, resolved relative to the manifest itself.
std::vector<SequenceData> load_manifest_sequences(
    const std::vector<ManifestEntry>& entries, const std::string& manifest) {
  fs::path base = fs::path(manifest).parent_path();
  std::vector<SequenceData> seqs;
  seqs.reserve(entries.size());
  for (const ManifestEntry& e : entries)
    seqs.push_back(load_sequence((base / e.filename).string()));
  return seqs;
}

UpdateMask parse_freeze(const std::string& list) {
  UpdateMask mask;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    if (name == "A") mask.A = false;
    else if (name == "C") mask.C = false;
    else if (name == "D") mask.D = false;
    else if (name == "Q") mask.Q = false;
    else if (name == "R") mask.R = false;
    else if (name == "Pi") mask.Pi = false;
    else if (name == "pi0") mask.pi0 = false;
    else throw std::invalid_argument("--freeze: unknown parameter " + name);
  }
  return mask;
}

void run_sample(const std::string& model_path, int length, std::uint64_t seed,
                const std::string& out) {
  ModelParams params = load_model(model_path);
  auto [seq, latent] = sample(params, length, seed);
  save_sequence(seq, out);

  // Continuous latents as a second sequence file alongside the observations.
  SequenceData x_track;
  x_track.y = latent.x;
  save_sequence(x_track, out + ".x");
  std::cout << "wrote " << out << " and " << out << ".x\n";
}

void run_infer(const std::string& model_path, const std::string& seq_path,
               const std::string& method, double tol, int max_iter,
               const std::string& out) {
  ModelParams params = load_model(model_path);
  SequenceData seq = load_sequence(seq_path);
  const int t_len = seq.length();
  std::ofstream file = open_out(out);

  if (method == "variational") {
    auto [state, stats] = e_step(params, seq, std::nullopt, tol, max_iter);
    file << "method\tvariational\n";
    file << "bound\t" << format_double(stats.bound) << "\n";
    file << "iterations\t" << state.iterations << "\n";
    file << "converged\t" << (state.converged ? 1 : 0) << "\n";
    file << "gamma\n";
    for (int t = 0; t < t_len; ++t) write_vec_row(file, stats.s_mean[t]);
    file << "x_mean\n";
    for (int t = 0; t < t_len; ++t) write_vec_row(file, stats.x_mean[t]);
    std::cout << "bound " << format_double(stats.bound) << " after "
              << state.iterations << " iterations"
              << (state.converged ? "" : " (not converged)") << "\n";
  } else if (method == "greedy") {
    GreedyResult res = greedy_truncated_viterbi(params, seq);
    file << "method\tgreedy\n";
    file << "total_cost\t" << format_double(res.total_cost) << "\n";
    file << "path\n";
    for (int t = 0; t < t_len; ++t)
      file << (t ? "\t" : "") << res.path[t];
    file << "\nu\n";
    for (int t = 0; t < t_len; ++t) write_vec_row(file, res.u[t]);
    std::cout << "greedy cost " << format_double(res.total_cost) << "\n";
  } else if (method == "exact") {
    PathPosterior post = exact_posterior(params, seq);
    file << "method\texact\n";
    file << "log_evidence\t" << format_double(post.log_evidence) << "\n";
    file << "map_path\n";
    for (int t = 0; t < t_len; ++t)
      file << (t ? "\t" : "") << post.map_path[t];
    file << "\ns_marginals\n";
    for (int t = 0; t < t_len; ++t) write_vec_row(file, post.s_marginals[t]);
    file << "x_marginals\n";
    for (int t = 0; t < t_len; ++t) write_vec_row(file, post.x_marginals[t]);
    std::cout << "log evidence " << format_double(post.log_evidence) << "\n";
  } else {
    throw std::invalid_argument("--method: unknown method " + method);
  }
  std::cout << "wrote " << out << "\n";
}

void run_train(const std::string& manifest_path, const std::string& init_path,
               double e_tol, double em_tol, int max_em,
               const std::string& freeze, const std::string& out) {
  std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  std::vector<SequenceData> seqs =
      load_manifest_sequences(entries, manifest_path);
  ModelParams init = load_model(init_path);

  TrainConfig cfg;
  cfg.e_tol = e_tol;
  cfg.em_tol = em_tol;
  cfg.max_em_iter = max_em;
  cfg.update = parse_freeze(freeze);

  auto [trained, history] = em_train(seqs, init, cfg);
  save_model(trained, out);
  std::ofstream hist = open_out(out + ".history");
  for (double b : history) hist << format_double(b) << "\n";
  std::cout << "final bound " << format_double(history.back()) << " after "
            << history.size() << " EM iterations\nwrote " << out << " and "
            << out << ".history\n";
}

void run_classify(const std::string& models_dir,
                  const std::string& manifest_path, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(models_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error(models_dir + ": no model files");

  std::vector<std::string> class_names;
  std::vector<ModelParams> models;
  for (const fs::path& f : files) {
    class_names.push_back(f.stem().string());
    models.push_back(load_model(f.string()));
  }
  auto class_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < class_names.size(); ++c)
      if (class_names[c] == name) return static_cast<int>(c);
    throw std::runtime_error("manifest class " + name +
                             " has no model in " + models_dir);
  };

  std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  std::vector<SequenceData> seqs =
      load_manifest_sequences(entries, manifest_path);

  const int n = static_cast<int>(seqs.size());
  const int k = static_cast<int>(models.size());
  std::vector<int> predicted(n);
  parallel_for(n, [&](int i) {
    predicted[i] = classify(models, seqs[i]).predicted;
  });

  Report report;
  report.class_names = class_names;
  report.confusion = Mat::Zero(k, k);
  report.class_error.assign(k, 0.0);
  report.class_error_var.assign(k, 0.0);
  std::vector<int> totals(k, 0);
  int wrong = 0;
  for (int i = 0; i < n; ++i) {
    int truth = class_of(entries[i].class_name);
    report.confusion(truth, predicted[i]) += 1.0;
    ++totals[truth];
    if (predicted[i] != truth) {
      report.class_error[truth] += 1.0;
      ++wrong;
    }
    std::cout << entries[i].filename << "\t" << class_names[predicted[i]]
              << "\n";
  }
  for (int c = 0; c < k; ++c)
    if (totals[c] > 0) report.class_error[c] /= totals[c];
  report.overall_error = n > 0 ? static_cast<double>(wrong) / n : 0.0;
  save_report(report, out);
  std::cout << "overall error " << format_double(report.overall_error)
            << "\nwrote " << out << "\n";
}

Report to_report(const std::vector<std::string>& names,
                 const CrossValResult& cv) {
  Report r;
  r.class_names = names;
  r.confusion = cv.confusion;
  r.class_error = cv.class_error;
  r.class_error_var = cv.class_error_var;
  r.overall_error = cv.overall_error;
  return r;
}

void print_cv(const std::string& label, const std::vector<std::string>& names,
              const CrossValResult& cv) {
  std::printf("%s: overall error %.4f\n", label.c_str(), cv.overall_error);
  for (std::size_t c = 0; c < names.size(); ++c)
    std::printf("  %-8s error %.4f (var %.6f)\n", names[c].c_str(),
                cv.class_error[c], cv.class_error_var[c]);
}

void run_bench(int per_class, double noise_sd, int folds, std::uint64_t seed,
               const std::string& out) {
  BenchConfig cfg;
  cfg.per_class = per_class;
  cfg.noise_sd = noise_sd;
  cfg.folds = folds;
  cfg.seed = seed;
  BenchResult res = run_gesture_benchmark(cfg);

  print_cv("coupled", res.class_names, res.coupled);
  print_cv("gradient baseline", res.class_names, res.gradient);
  std::printf("median E-step iterations %.1f\n",
              res.median_e_step_iterations);

  save_report(to_report(res.class_names, res.coupled), out);
  save_report(to_report(res.class_names, res.gradient), out + ".baseline");
  std::cout << "wrote " << out << " and " << out << ".baseline\n";
}

std::string signed_state(int s) { return s == 0 ? "-1" : "+1"; }

std::string path_string(const std::vector<int>& path) {
  std::string text;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t) text += " ";
    text += signed_state(path[t]);
  }
  return text;
}

void run_repro_sec4(double k, double r_scale, double eps,
                    const std::string& out) {
  std::ostringstream text;
  char line[160];

  std::snprintf(line, sizeof line, "trellis costs (k=%g, R=%g, eps=%g)\n",
                k, r_scale, eps);
  text << line << "path        total cost\n";
  for (const TwoStateDemoPath& p : twostate_trellis(k, r_scale, eps)) {
    std::snprintf(line, sizeof line, "%-12s%g\n", path_string(p.path).c_str(),
                  p.total_cost);
    text << line;
  }

  TwoStateDemoPath greedy = twostate_greedy(k, r_scale, eps);
  TwoStateDemoPath optimal = twostate_trellis(k, r_scale, eps).front();
  std::snprintf(line, sizeof line, "greedy path: %s   total cost %g\n",
                path_string(greedy.path).c_str(), greedy.total_cost);
  text << line;
  std::snprintf(line, sizeof line, "optimal path: %s   total cost %g\n",
                path_string(optimal.path).c_str(), optimal.total_cost);
  text << line;

  // The fixed-point trace needs state noise; when the trellis is run at
  // k = 0 fall back to the k = 1, R = 0.5 setting of the demo.
  double vk = k > 0.0 ? k : 1.0;
  double vr = k > 0.0 ? r_scale : 0.5;
  ModelParams params = twostate_model(vk, vr, eps);
  SequenceData y = twostate_observations();

  std::snprintf(line, sizeof line,
                "\nvariational trace (k=%g, R=%g, eps=%g)\n", vk, vr, eps);
  text << line;
  text << "iter      u_1      u_2      u_3  g_1(-1)  g_2(-1)  g_3(-1)\n";
  Vec prev_u = Vec::Zero(3);  // D pi0, the default starting input
  for (int it = 1; it <= 10; ++it) {
    auto [state, stats] = e_step(params, y, std::nullopt, 0.0, it);
    std::snprintf(line, sizeof line,
                  "%4d %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f\n", it, prev_u(0),
                  prev_u(1), prev_u(2), stats.s_mean[0](0), stats.s_mean[1](0),
                  stats.s_mean[2](0));
    text << line;
    for (int t = 0; t < 3; ++t) prev_u(t) = state.u[t](0);
  }

  std::cout << text.str();
  if (!out.empty()) open_out(out) << text.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed-state dynamic Bayesian network toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out = "out.txt";

  auto* cmd_sample = app.add_subcommand("sample", "draw a sequence from a model");
  std::string model_path, seq_path;
  int length = 100;
  cmd_sample->add_option("--model", model_path, "model file")->required();
  cmd_sample->add_option("--length", length, "sequence length")->required();
  cmd_sample->add_option("--seed", seed, "random seed");
  cmd_sample->add_option("--out", out, "output sequence file");
  cmd_sample->callback([&] { run_sample(model_path, length, seed, out); });

  auto* cmd_infer = app.add_subcommand("infer", "posterior inference on a sequence");
  std::string method = "variational";
  double tol = 1e-3;
  int max_iter = 100;
  cmd_infer->add_option("--model", model_path, "model file")->required();
  cmd_infer->add_option("--sequence", seq_path, "sequence file")->required();
  cmd_infer->add_option("--method", method,
                        "variational, greedy, or exact");
  cmd_infer->add_option("--tol", tol, "relative bound tolerance");
  cmd_infer->add_option("--max-iter", max_iter, "fixed-point sweep cap");
  cmd_infer->add_option("--seed", seed, "random seed (unused, accepted)");
  cmd_infer->add_option("--out", out, "output summary file");
  cmd_infer->callback(
      [&] { run_infer(model_path, seq_path, method, tol, max_iter, out); });

  auto* cmd_train = app.add_subcommand("train", "variational EM on a manifest");
  std::string manifest_path, init_path, freeze;
  double e_tol = 1e-3, em_tol = 1e-4;
  int max_em = 50;
  cmd_train->add_option("--manifest", manifest_path, "sequence manifest")
      ->required();
  cmd_train->add_option("--init", init_path, "initial model file")->required();
  cmd_train->add_option("--e-tol", e_tol, "E-step bound tolerance");
  cmd_train->add_option("--em-tol", em_tol, "EM bound tolerance");
  cmd_train->add_option("--max-em", max_em, "EM iteration cap");
  cmd_train->add_option("--freeze", freeze,
                        "comma-separated parameters to keep fixed");
  cmd_train->add_option("--seed", seed, "random seed (unused, accepted)");
  cmd_train->add_option("--out", out, "trained model file");
  cmd_train->callback([&] {
    run_train(manifest_path, init_path, e_tol, em_tol, max_em, freeze, out);
  });

  auto* cmd_classify =
      app.add_subcommand("classify", "score a manifest against a model set");
  std::string models_dir;
  cmd_classify->add_option("--models", models_dir, "directory of model files")
      ->required();
  cmd_classify->add_option("--manifest", manifest_path, "sequence manifest")
      ->required();
  cmd_classify->add_option("--seed", seed, "random seed (unused, accepted)");
  cmd_classify->add_option("--out", out, "report file");
  cmd_classify->callback(
      [&] { run_classify(models_dir, manifest_path, out); });

  auto* cmd_bench =
      app.add_subcommand("bench-gestures", "synthetic gesture benchmark");
  int per_class = 50, folds = 4;
  double noise_sd = 0.01;
  std::uint64_t bench_seed = 42;
  cmd_bench->add_option("--per-class", per_class, "examples per class");
  cmd_bench->add_option("--noise-sd", noise_sd, "observation noise sd");
  cmd_bench->add_option("--folds", folds, "cross-validation folds");
  cmd_bench->add_option("--seed", bench_seed, "dataset seed");
  cmd_bench->add_option("--out", out, "report file");
  cmd_bench->callback(
      [&] { run_bench(per_class, noise_sd, folds, bench_seed, out); });

  auto* cmd_repro =
      app.add_subcommand("repro-sec4", "two-state demo tables");
  double demo_k = 0.0, demo_r = 0.5, demo_eps = 0.0;
  std::string repro_out;
  cmd_repro->add_option("--k", demo_k, "state noise scale, Q = k R");
  auto* r_opt = cmd_repro->add_option("--R", demo_r,
                                      "observation noise (default 1 when "
                                      "k = 0, else 0.5)");
  cmd_repro->add_option("--eps", demo_eps, "transition bias");
  cmd_repro->add_option("--seed", seed, "random seed (unused, accepted)");
  cmd_repro->add_option("--out", repro_out, "also write the tables here");
  cmd_repro->callback([&] {
    double r_scale = demo_r;
    if (r_opt->count() == 0) r_scale = demo_k == 0.0 ? 1.0 : 0.5;
    run_repro_sec4(demo_k, r_scale, demo_eps, repro_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
