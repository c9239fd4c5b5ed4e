#ifndef AUTOGMM_IO_HPP
#define AUTOGMM_IO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "autogmm/hgmm.hpp"
#include "autogmm/metrics.hpp"
#include "autogmm/search.hpp"

namespace autogmm {

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

enum class SyntheticKind { three_component, double_cigar, hierarchy };

std::string_view to_string(SyntheticKind k);
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::three_component;
  std::uint64_t seed = 0;
  // Total size for three_component (default 100); points per component
  // otherwise (default 100).
  int count = 0;
};

struct SyntheticData {
  DataMatrix data;
  Labels truth;  // finest level
  // hierarchy only: 2- and 4-cluster groupings of `truth`
  Labels truth_coarse;
  Labels truth_middle;
};

/// Component means of the hierarchy dataset, ascending; component j belongs to
/// middle group j / 2 and coarse group j / 4.
inline constexpr std::array<double, 8> kHierarchyMeans = {-15.0, -13.0, -8.0, -6.0,
                                                          6.0,   8.0,   13.0, 15.0};
inline constexpr double kHierarchySigma = 0.5;

/// Draws a dataset. Normal variates come from the Box-Muller transform over a
/// 64-bit Mersenne Twister, so output is reproducible for a given seed.
SyntheticData generate(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Comma-separated numeric rows. Throws ParseError naming `source` and the
/// 1-based line for ragged rows, non-numeric cells or empty input.
DataMatrix parse_matrix(std::string_view text, bool has_header, const std::string& source = "<input>");
DataMatrix read_matrix(const std::filesystem::path& path, bool has_header = false);
void write_matrix(const std::filesystem::path& path, const DataMatrix& data);

/// One integer per line.
Labels parse_labels(std::string_view text, const std::string& source = "<input>");
Labels read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const Labels& labels);

/// Grid table: affinity,linkage,constraint,k,status,criterion_value,reg_covar.
std::string grid_csv(const std::vector<CandidateResult>& grid);

/// Shortest-safe decimal form with 17 significant digits.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

struct RunInfo {
  Criterion criterion = Criterion::bic;
  std::uint64_t seed = 0;
};

/// Model record: criterion, criterion_value, k, d, n, constraint, reg_covar,
/// init {affinity, linkage}, weights, means, covariances, seed.
nlohmann::json candidate_to_json(const CandidateResult& cand, long n, const RunInfo& info);

/// Rebuilds the mixture from a model record.
GmmModel model_from_json(const nlohmann::json& j);

/// Nested tree: depth, size, children, model (record or null), leaf_reason.
nlohmann::json dendrogram_to_json(const DendrogramNode& node, const RunInfo& info);

nlohmann::json benchmark_summary_json(const BenchmarkReport& report, std::string_view metric);
std::string benchmark_csv(const BenchmarkReport& report, bool with_timing);

void write_text(const std::filesystem::path& path, std::string_view text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_text(const std::filesystem::path& path);

}  // namespace autogmm

#endif  // AUTOGMM_IO_HPP
