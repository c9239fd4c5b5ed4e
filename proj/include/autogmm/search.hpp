#ifndef AUTOGMM_SEARCH_HPP
#define AUTOGMM_SEARCH_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autogmm/gmm.hpp"
#include "autogmm/init.hpp"

namespace autogmm {

/// Diagonal loadings tried in order until a fit succeeds.
inline constexpr std::array<double, 8> kRegLadder = {0.0,  1e-6, 1e-5, 1e-4,
                                                     1e-3, 1e-2, 1e-1, 1e0};
inline constexpr double kRegCeiling = 1.0;

/// Next rung: 0 -> 1e-6, otherwise x10 (snapped to the exact decade).
double increase_reg(double reg);

struct SearchConfig {
  int kmin = 2;
  int kmax = 20;
  std::vector<Affinity> affinities = {Affinity::l2, Affinity::l1, Affinity::cosine,
                                      Affinity::none};
  std::vector<Linkage> linkages = {Linkage::ward, Linkage::complete, Linkage::average,
                                   Linkage::single};
  std::vector<CovarianceConstraint> constraints = {kAllConstraints.begin(), kAllConstraints.end()};
  Criterion criterion = Criterion::bic;
  std::size_t subset_cap = 2000;
  int kmeans_reps = 1;
  EmSettings em;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency

  /// Initialization methods allowed by the affinity/linkage sets, canonical order.
  std::vector<InitMethod> methods() const;
  /// Allowed constraints in complexity order, duplicates removed.
  std::vector<CovarianceConstraint> constraint_set() const;
  void validate() const;
};

enum class CandidateStatus { converged, failed };

/// One (initialization, constraint, k) cell of the search grid.
struct CandidateResult {
  InitMethod method;
  CovarianceConstraint constraint = CovarianceConstraint::full;
  int k = 0;
  CandidateStatus status = CandidateStatus::failed;
  std::optional<double> criterion_value;  // set iff converged
  double reg_covar = 0.0;                 // rung that succeeded, or the last one tried
  std::optional<FitResult> fit;           // set iff converged
  std::string failure_reason;

  bool converged() const { return status == CandidateStatus::converged; }
};

struct SearchResult {
  CandidateResult best;
  std::vector<CandidateResult> grid;  // ordered by k, method, constraint
  std::size_t max_agglomeration_rows = 0;
};

/// Orders converged candidates: higher criterion first, then smaller k, simpler
/// constraint, earlier canonical method.
bool candidate_precedes(const CandidateResult& a, const CandidateResult& b);

/// Fits one cell with the regularization ladder. Starting from reg 0, a rung
/// fails when initialization or EM fails, or when the hard clustering leaves a
/// cluster with fewer than two points; the next rung is then tried. Never throws
/// for fitting problems: failures are reported in the status.
CandidateResult gaussian_cluster(const DataMatrix& data, int k, CovarianceConstraint constraint,
                                 const std::optional<Labels>& init, const EmSettings& em,
                                 Criterion criterion = Criterion::bic);

/// Exhaustive search over k in [kmin, kmax], allowed initializations and
/// constraints. Throws SearchError when no cell converges.
SearchResult autogmm_search(const DataMatrix& data, const SearchConfig& config);

}  // namespace autogmm

#endif  // AUTOGMM_SEARCH_HPP
