#include "msdbn/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace msdbn {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

std::string next_line(std::istream& in, const std::string& path,
                      const char* what) {
  std::string line;
  if (!std::getline(in, line)) fail(path, std::string("missing ") + what);
  return line;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string tok;
  while (ss >> tok) toks.push_back(tok);
  return toks;
}

int parse_int(const std::string& tok, const std::string& path) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    fail(path, "bad integer '" + tok + "'");
  return value;
}

int labeled_int(std::istream& in, const std::string& path, const char* label) {
  auto toks = tokens_of(next_line(in, path, label));
  if (toks.size() != 2 || toks[0] != label)
    fail(path, std::string("expected '") + label + " <value>'");
  return parse_int(toks[1], path);
}

void write_row(std::ostream& out, const Vec& row) {
  for (int i = 0; i < row.size(); ++i) {
    if (i) out << ' ';
    out << format_double(row(i));
  }
  out << '\n';
}

Mat read_matrix(std::istream& in, const std::string& path, const char* label,
                int rows, int cols) {
  std::string header = next_line(in, path, label);
  if (header != label)
    fail(path, std::string("expected block '") + label + "', got '" + header +
                   "'");
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    auto toks = tokens_of(next_line(in, path, label));
    if (static_cast<int>(toks.size()) != cols)
      fail(path, std::string(label) + ": expected " + std::to_string(cols) +
                     " values per row, got " + std::to_string(toks.size()));
    for (int c = 0; c < cols; ++c) m(r, c) = parse_double(toks[c]);
  }
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open for reading");
  return in;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& token) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw std::runtime_error("bad number '" + token + "'");
  return value;
}

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "state_dim " << params.state_dim << '\n';
  out << "obs_dim " << params.obs_dim << '\n';
  out << "num_states " << params.num_states << '\n';
  auto block = [&out](const char* label, const Mat& m) {
    out << label << '\n';
    for (int r = 0; r < m.rows(); ++r) write_row(out, m.row(r).transpose());
  };
  block("A", params.A);
  block("C", params.C);
  block("D", params.D);
  block("Q", params.Q);
  block("R", params.R);
  block("Pi", params.Pi);
  out << "pi0\n";
  write_row(out, params.pi0);
  if (!out) fail(path, "write failed");
}

ModelParams load_model(const std::string& path) {
  std::ifstream in = open_in(path);
  ModelParams params;
  params.state_dim = labeled_int(in, path, "state_dim");
  params.obs_dim = labeled_int(in, path, "obs_dim");
  params.num_states = labeled_int(in, path, "num_states");
  if (params.state_dim < 1 || params.obs_dim < 1 || params.num_states < 1)
    fail(path, "dimensions must be positive");
  const int n = params.state_dim, m = params.obs_dim, s = params.num_states;
  params.A = read_matrix(in, path, "A", n, n);
  params.C = read_matrix(in, path, "C", m, n);
  params.D = read_matrix(in, path, "D", n, s);
  params.Q = read_matrix(in, path, "Q", n, n);
  params.R = read_matrix(in, path, "R", m, m);
  params.Pi = read_matrix(in, path, "Pi", s, s);
  params.pi0 = read_matrix(in, path, "pi0", 1, s).row(0).transpose();
  return params;
}

void save_sequence(const SequenceData& seq, const std::string& path) {
  std::ofstream out = open_out(path);
  const int T = seq.length();
  const int m = T > 0 ? static_cast<int>(seq.y[0].size()) : 0;
  out << T << ' ' << m << '\n';
  for (const Vec& y : seq.y) {
    if (y.size() != m) fail(path, "inconsistent observation dimensions");
    write_row(out, y);
  }
  if (!seq.true_states.empty()) {
    if (static_cast<int>(seq.true_states.size()) != T)
      fail(path, "labels length differs from sequence length");
    out << "labels";
    for (int s : seq.true_states) out << ' ' << s;
    out << '\n';
  }
  if (!out) fail(path, "write failed");
}

SequenceData load_sequence(const std::string& path) {
  std::ifstream in = open_in(path);
  auto header = tokens_of(next_line(in, path, "header"));
  if (header.size() != 2) fail(path, "expected 'T M' header");
  const int T = parse_int(header[0], path);
  const int m = parse_int(header[1], path);
  if (T < 1 || m < 1) fail(path, "bad header dimensions");

  SequenceData seq;
  seq.y.reserve(T);
  for (int t = 0; t < T; ++t) {
    auto toks = tokens_of(next_line(in, path, "observation row"));
    if (static_cast<int>(toks.size()) != m)
      fail(path, "expected " + std::to_string(m) + " values per row");
    Vec y(m);
    for (int d = 0; d < m; ++d) y(d) = parse_double(toks[d]);
    seq.y.push_back(std::move(y));
  }
  std::string line;
  if (std::getline(in, line) && !line.empty()) {
    auto toks = tokens_of(line);
    if (toks.empty() || toks[0] != "labels")
      fail(path, "unexpected trailing line '" + line + "'");
    if (static_cast<int>(toks.size()) != T + 1)
      fail(path, "labels line must carry one index per step");
    for (int t = 0; t < T; ++t)
      seq.true_states.push_back(parse_int(toks[t + 1], path));
  }
  return seq;
}

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path) {
  std::ofstream out = open_out(path);
  for (const ManifestEntry& e : entries)
    out << e.filename << ' ' << e.class_name << ' ' << e.fold << '\n';
  if (!out) fail(path, "write failed");
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = tokens_of(line);
    if (toks.size() != 3)
      fail(path, "expected 'filename class fold', got '" + line + "'");
    entries.push_back({toks[0], toks[1], parse_int(toks[2], path)});
  }
  return entries;
}

void save_report(const Report& report, const std::string& path) {
  std::ofstream out = open_out(path);
  const int k = static_cast<int>(report.class_names.size());
  out << "classes\t" << k << '\n';
  if (k == 0) {
    if (!out) fail(path, "write failed");
    return;
  }
  out << "confusion\n";
  for (int c = 0; c < k; ++c) {
    out << report.class_names[c] << '\t'
        << format_double(report.confusion.row(c).sum());
    for (int p = 0; p < k; ++p)
      out << '\t' << format_double(report.confusion(c, p));
    out << '\n';
  }
  out << "errors\n";
  for (int c = 0; c < k; ++c)
    out << report.class_names[c] << '\t'
        << format_double(report.class_error[c]) << '\t'
        << format_double(report.class_error_var[c]) << '\n';
  out << "overall\t" << format_double(report.overall_error) << '\n';
  for (const auto& trace : report.bound_traces) {
    out << "bound_trace";
    for (double b : trace) out << '\t' << format_double(b);
    out << '\n';
  }
  if (!out) fail(path, "write failed");
}

Report load_report(const std::string& path) {
  std::ifstream in = open_in(path);
  Report report;
  auto head = tokens_of(next_line(in, path, "classes header"));
  if (head.size() != 2 || head[0] != "classes")
    fail(path, "expected 'classes <count>' header");
  const int k = parse_int(head[1], path);
  if (k == 0) return report;

  if (next_line(in, path, "confusion header") != "confusion")
    fail(path, "expected 'confusion'");
  report.confusion = Mat::Zero(k, k);
  for (int c = 0; c < k; ++c) {
    auto toks = tokens_of(next_line(in, path, "confusion row"));
    if (static_cast<int>(toks.size()) != 2 + k)
      fail(path, "confusion rows must have 2 + num_classes columns");
    report.class_names.push_back(toks[0]);
    for (int p = 0; p < k; ++p)
      report.confusion(c, p) = parse_double(toks[2 + p]);
  }
  if (next_line(in, path, "errors header") != "errors")
    fail(path, "expected 'errors'");
  for (int c = 0; c < k; ++c) {
    auto toks = tokens_of(next_line(in, path, "error row"));
    if (toks.size() != 3 || toks[0] != report.class_names[c])
      fail(path, "bad error row for class " + report.class_names[c]);
    report.class_error.push_back(parse_double(toks[1]));
    report.class_error_var.push_back(parse_double(toks[2]));
  }
  auto overall = tokens_of(next_line(in, path, "overall line"));
  if (overall.size() != 2 || overall[0] != "overall")
    fail(path, "expected 'overall <error>'");
  report.overall_error = parse_double(overall[1]);

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = tokens_of(line);
    if (toks[0] != "bound_trace")
      fail(path, "unexpected trailing line '" + line + "'");
    std::vector<double> trace;
    for (std::size_t i = 1; i < toks.size(); ++i)
      trace.push_back(parse_double(toks[i]));
    report.bound_traces.push_back(std::move(trace));
  }
  return report;
}

}  // namespace msdbn
