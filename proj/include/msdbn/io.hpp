#pragma once

#include <string>
#include <vector>

#include "msdbn/model.hpp"

namespace msdbn {

// Locale-independent full-precision decimal (17 significant digits; exact
// binary round trip).
std::string format_double(double value);
double parse_double(const std::string& token);

// Plain-text model file: the three dimensions, then the parameter blocks
// A, C, D, Q, R, Pi, pi0 in that order, matrices row by row. load_model
// throws std::runtime_error naming the path and the offending line on any
// mismatch.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

// Sequence file: a "T M" header, T observation rows, and an optional
// trailing "labels" line with T state indices.
void save_sequence(const SequenceData& seq, const std::string& path);
SequenceData load_sequence(const std::string& path);

// Dataset manifest: one "filename class_name fold" line per sequence.
struct ManifestEntry {
  std::string filename;
  std::string class_name;
  int fold = -1;
};

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path);
std::vector<ManifestEntry> load_manifest(const std::string& path);

// Classification metrics as tab-separated tables. Confusion rows carry
// 2 + num_classes columns: class name, row total, then predicted counts.
struct Report {
  std::vector<std::string> class_names;
  Mat confusion;                        // rows true class, columns predicted
  std::vector<double> class_error;      // per-class mean error over folds
  std::vector<double> class_error_var;  // variance of that mean
  double overall_error = 0.0;
  std::vector<std::vector<double>> bound_traces;  // optional, e.g. from EM
};

void save_report(const Report& report, const std::string& path);
Report load_report(const std::string& path);

}  // namespace msdbn
