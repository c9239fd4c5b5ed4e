#include "autogmm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace autogmm {

using nlohmann::json;

namespace {

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd rows_matrix(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ParseError("model record: unexpected array shape");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError("model record: unexpected array shape");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json covariances_json(const GmmModel& model) {
  const int d = model.d();
  switch (model.constraint) {
    case CovarianceConstraint::full: {
      json out = json::array();
      for (int j = 0; j < model.k(); ++j) {
        out.push_back(matrix_rows(model.covariances.block(j * d, 0, d, d)));
      }
      return out;
    }
    case CovarianceConstraint::tied:
    case CovarianceConstraint::diag: return matrix_rows(model.covariances);
    case CovarianceConstraint::spherical: {
      json out = json::array();
      for (int j = 0; j < model.k(); ++j) out.push_back(model.covariances(j, 0));
      return out;
    }
  }
  return nullptr;
}

}  // namespace

std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::three_component: return "three_component";
    case SyntheticKind::double_cigar: return "double_cigar";
    case SyntheticKind::hierarchy: return "hierarchy";
  }
  return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  for (auto k : {SyntheticKind::three_component, SyntheticKind::double_cigar,
                 SyntheticKind::hierarchy}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown synthetic kind '" + std::string(name) + "'");
}

SyntheticData generate(const SyntheticSpec& spec) {
  if (spec.count < 0) throw InputError("synthetic count must be positive");
  NormalSampler normal(spec.seed);
  SyntheticData out;
  switch (spec.kind) {
    case SyntheticKind::three_component: {
      // Equal weights, identity covariances; sizes differ by at most one.
      const int total = spec.count > 0 ? spec.count : 100;
      const double means[3][3] = {{0, 0, 0}, {5, 0, 0}, {0, 5, 0}};
      out.data.resize(total, 3);
      out.truth.resize(static_cast<std::size_t>(total));
      int row = 0;
      for (int c = 0; c < 3; ++c) {
        const int size = total / 3 + (c < total % 3 ? 1 : 0);
        for (int i = 0; i < size; ++i, ++row) {
          for (int dim = 0; dim < 3; ++dim) out.data(row, dim) = means[c][dim] + normal();
          out.truth[static_cast<std::size_t>(row)] = c;
        }
      }
      break;
    }
    case SyntheticKind::double_cigar: {
      const int per = spec.count > 0 ? spec.count : 100;
      const double sd_y = std::sqrt(200.0);
      out.data.resize(2 * per, 2);
      out.truth.resize(static_cast<std::size_t>(2 * per));
      for (int c = 0; c < 2; ++c) {
        const double mx = c == 0 ? -3.0 : 3.0;
        for (int i = 0; i < per; ++i) {
          const int row = c * per + i;
          out.data(row, 0) = mx + normal();
          out.data(row, 1) = sd_y * normal();
          out.truth[static_cast<std::size_t>(row)] = c;
        }
      }
      break;
    }
    case SyntheticKind::hierarchy: {
      const int per = spec.count > 0 ? spec.count : 100;
      const int total = per * static_cast<int>(kHierarchyMeans.size());
      out.data.resize(total, 1);
      out.truth.resize(static_cast<std::size_t>(total));
      out.truth_middle.resize(static_cast<std::size_t>(total));
      out.truth_coarse.resize(static_cast<std::size_t>(total));
      for (int c = 0; c < static_cast<int>(kHierarchyMeans.size()); ++c) {
        for (int i = 0; i < per; ++i) {
          const int row = c * per + i;
          out.data(row, 0) = kHierarchyMeans[static_cast<std::size_t>(c)] + kHierarchySigma * normal();
          out.truth[static_cast<std::size_t>(row)] = c;
          out.truth_middle[static_cast<std::size_t>(row)] = c / 2;
          out.truth_coarse[static_cast<std::size_t>(row)] = c / 4;
        }
      }
      break;
    }
  }
  return out;
}

DataMatrix parse_matrix(std::string_view text, bool has_header, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  const auto lines = split_lines(text);
  bool header_pending = has_header;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      double v = 0.0;
      if (!parse_number(cell, v)) {
        throw ParseError(source + ": line " + std::to_string(ln + 1) + ": non-numeric cell '" +
                         std::string(trim(cell)) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError(source + ": line " + std::to_string(ln + 1) + ": expected " +
                       std::to_string(width) + " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source + ": no data rows");
  DataMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < width; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return m;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DataMatrix read_matrix(const std::filesystem::path& path, bool has_header) {
  return parse_matrix(read_text(path), has_header, path.string());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void write_matrix(const std::filesystem::path& path, const DataMatrix& data) {
  std::string text;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c > 0) text += ',';
      text += format_double(data(i, c));
    }
    text += '\n';
  }
  write_text(path, text);
}

Labels parse_labels(std::string_view text, const std::string& source) {
  Labels out;
  const auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    int v = 0;
    if (!parse_number(line, v)) {
      throw ParseError(source + ": line " + std::to_string(ln + 1) + ": expected an integer label");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParseError(source + ": no labels");
  return out;
}

Labels read_labels(const std::filesystem::path& path) {
  return parse_labels(read_text(path), path.string());
}

void write_labels(const std::filesystem::path& path, const Labels& labels) {
  std::string text;
  for (int l : labels) {
    text += std::to_string(l);
    text += '\n';
  }
  write_text(path, text);
}

std::string grid_csv(const std::vector<CandidateResult>& grid) {
  std::string out = "affinity,linkage,constraint,k,status,criterion_value,reg_covar\n";
  for (const auto& c : grid) {
    out += to_string(c.method.affinity);
    out += ',';
    out += c.method.linkage ? to_string(*c.method.linkage) : std::string_view("none");
    out += ',';
    out += to_string(c.constraint);
    out += ',' + std::to_string(c.k) + ',';
    out += c.converged() ? "converged" : "failed";
    out += ',';
    if (c.criterion_value) out += format_double(*c.criterion_value);
    out += ',' + format_double(c.reg_covar) + '\n';
  }
  return out;
}

json candidate_to_json(const CandidateResult& cand, long n, const RunInfo& info) {
  if (!cand.fit) throw InputError("only converged candidates have a model record");
  const GmmModel& model = cand.fit->model;
  json j;
  j["criterion"] = std::string(to_string(info.criterion));
  j["criterion_value"] = *cand.criterion_value;
  j["k"] = model.k();
  j["d"] = model.d();
  j["n"] = n;
  j["constraint"] = std::string(to_string(model.constraint));
  j["reg_covar"] = cand.reg_covar;
  j["init"] = {{"affinity", std::string(to_string(cand.method.affinity))},
               {"linkage", cand.method.linkage ? json(std::string(to_string(*cand.method.linkage)))
                                               : json(nullptr)}};
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["means"] = matrix_rows(model.means);
  j["covariances"] = covariances_json(model);
  j["seed"] = info.seed;
  return j;
}

GmmModel model_from_json(const json& j) {
  try {
    GmmModel model;
    const int k = j.at("k").get<int>();
    const int d = j.at("d").get<int>();
    model.constraint = parse_constraint(j.at("constraint").get<std::string>());
    model.reg_covar = j.at("reg_covar").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != k) throw ParseError("model record: weights length != k");
    model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), k);
    model.means = rows_matrix(j.at("means"), k, d);
    const json& cov = j.at("covariances");
    switch (model.constraint) {
      case CovarianceConstraint::full: {
        if (!cov.is_array() || static_cast<int>(cov.size()) != k) {
          throw ParseError("model record: expected k covariance matrices");
        }
        model.covariances.resize(static_cast<Eigen::Index>(k) * d, d);
        for (int c = 0; c < k; ++c) {
          model.covariances.block(c * d, 0, d, d) = rows_matrix(cov[static_cast<std::size_t>(c)], d, d);
        }
        break;
      }
      case CovarianceConstraint::tied: model.covariances = rows_matrix(cov, d, d); break;
      case CovarianceConstraint::diag: model.covariances = rows_matrix(cov, k, d); break;
      case CovarianceConstraint::spherical: {
        const auto v = cov.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != k) throw ParseError("model record: expected k variances");
        model.covariances = Eigen::Map<const Eigen::VectorXd>(v.data(), k);
        break;
      }
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model record: ") + e.what());
  }
}

json dendrogram_to_json(const DendrogramNode& node, const RunInfo& info) {
  json j;
  j["depth"] = node.depth;
  j["size"] = node.indices.size();
  json children = json::array();
  for (const auto& child : node.children) children.push_back(dendrogram_to_json(child, info));
  j["children"] = std::move(children);
  j["model"] = node.selection && node.selection->fit
                   ? candidate_to_json(*node.selection, static_cast<long>(node.indices.size()), info)
                   : json(nullptr);
  j["leaf_reason"] =
      node.leaf_reason == LeafReason::none ? json(nullptr) : json(std::string(to_string(node.leaf_reason)));
  if (!node.failure.empty()) j["failure"] = node.failure;
  return j;
}

std::string benchmark_csv(const BenchmarkReport& report, bool with_timing) {
  std::string out = with_timing ? "rep,method,status,k,ari,seconds\n" : "rep,method,status,k,ari\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.rep) + ',' + r.method + ',' + (r.failed ? "failed" : "ok") + ',';
    out += r.failed ? std::string() : std::to_string(r.k);
    out += ',';
    if (!r.failed) out += format_double(r.ari);
    if (with_timing) out += ',' + format_double(r.seconds);
    out += '\n';
  }
  return out;
}

json benchmark_summary_json(const BenchmarkReport& report, std::string_view metric) {
  json j;
  j["metric"] = std::string(metric);
  j["mode"] = report.mode == WilcoxonMode::normal ? "normal" : "exact";
  j["reps"] = report.subsets.size();
  j["subsample_size"] = report.subsets.empty() ? 0 : report.subsets.front().size();
  if (metric == "seconds") {
    j["threads"] = report.threads;
  }
  json tests = json::array();
  for (const auto& t : report.tests) {
    if (t.metric != metric) continue;
    json e;
    e["method_a"] = t.method_a;
    e["method_b"] = t.method_b;
    if (t.result) {
      e["statistic"] = t.result->statistic;
      e["p_value"] = t.result->p_value;
      e["n_used"] = t.result->n_used;
    } else {
      e["statistic"] = nullptr;
      e["p_value"] = nullptr;
      e["note"] = t.note;
    }
    tests.push_back(std::move(e));
  }
  j["tests"] = std::move(tests);
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace autogmm
