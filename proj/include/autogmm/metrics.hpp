#ifndef AUTOGMM_METRICS_HPP
#define AUTOGMM_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autogmm/search.hpp"

namespace autogmm {

/// Pair-counting adjusted Rand index. Returns 1.0 when both partitions are
/// trivial in the same way (expected index equals its maximum).
double adjusted_rand_index(const Labels& u, const Labels& v);

enum class WilcoxonMode { normal, exact };

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double p_value = 1.0;    // two-sided
  double z = 0.0;          // normal mode only
  int n_used = 0;          // pairs with a nonzero difference
};

/// Largest n (after dropping zero differences) accepted in exact mode.
inline constexpr int kWilcoxonExactMax = 15;

/// Two-sided signed-rank test on a - b. Zero differences are dropped and tied
/// magnitudes get averaged ranks. Normal mode uses the tie-corrected variance
/// without continuity correction; exact mode enumerates the null distribution
/// of the observed ranks.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMode mode = WilcoxonMode::normal);

struct NamedConfig {
  std::string name;
  SearchConfig config;
};

struct BenchmarkRecord {
  int rep = 0;
  std::string method;
  bool failed = false;
  std::string failure;
  int k = 0;
  double ari = 0.0;      // NaN when failed
  double seconds = 0.0;  // search call only
};

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  std::string metric;  // "ari" or "seconds"
  std::optional<WilcoxonResult> result;
  std::string note;  // why no result, when absent
};

struct BenchmarkReport {
  std::vector<std::vector<std::size_t>> subsets;  // shared by every method
  std::vector<BenchmarkRecord> records;           // rep-major, then method
  std::vector<PairwiseTest> tests;
  int threads = 1;
  WilcoxonMode mode = WilcoxonMode::normal;
};

/// Runs every config on `reps` shared random subsamples of round(frac * n) rows,
/// scoring ARI against the matching truth labels and timing each search call.
BenchmarkReport subsample_benchmark(const DataMatrix& data, const Labels& truth,
                                    const std::vector<NamedConfig>& configs, int reps = 10,
                                    double frac = 0.8, std::uint64_t seed = 0,
                                    WilcoxonMode mode = WilcoxonMode::normal);

}  // namespace autogmm

#endif  // AUTOGMM_METRICS_HPP
