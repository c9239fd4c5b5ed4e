#ifndef AUTOGMM_INIT_HPP
#define AUTOGMM_INIT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autogmm/common.hpp"
#include "autogmm/gmm.hpp"

namespace autogmm {

enum class Affinity { l2, l1, cosine, none };
enum class Linkage { ward, complete, average, single };

std::string_view to_string(Affinity a);
std::string_view to_string(Linkage l);
Affinity parse_affinity(std::string_view name);
Linkage parse_linkage(std::string_view name);

/// How a candidate's starting partition is produced. Affinity `none` is the
/// k-means route and carries no linkage; ward pairs only with L2.
struct InitMethod {
  Affinity affinity = Affinity::none;
  std::optional<Linkage> linkage;

  bool is_kmeans() const { return affinity == Affinity::none; }
  bool valid() const;
  std::string name() const;  // e.g. "l2-ward", "none"

  friend bool operator==(const InitMethod&, const InitMethod&) = default;
};

/// The 11 valid methods in canonical order: L2 x {ward, complete, average,
/// single}, L1 x {complete, average, single}, cosine x {...}, none.
const std::vector<InitMethod>& all_init_methods();

/// Position of `m` in all_init_methods(); throws InputError for invalid methods.
int canonical_index(const InitMethod& m);

/// Methods formed from the allowed affinities and linkages, in canonical order.
std::vector<InitMethod> methods_from(const std::vector<Affinity>& affinities,
                                     const std::vector<Linkage>& linkages);

/// Starting mixture parameters estimated from a hard partition.
struct InitParams {
  GmmModel model;  // weights, means and regularized covariances
  // Inverse covariances in the same constraint-shaped layout as model.covariances.
  Eigen::MatrixXd precisions;
};

/// Sorted indices of the rows kept by subset_data.
std::vector<std::size_t> subset_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

/// Identity when n <= cap, otherwise `cap` rows drawn uniformly without
/// replacement, kept in their original order.
DataMatrix subset_data(const DataMatrix& data, std::size_t cap, std::uint64_t seed);

/// One merge of a bottom-up clustering. Clusters are identified by their
/// smallest member index; `kept` < `absorbed`.
struct Merge {
  int kept = 0;
  int absorbed = 0;
  double distance = 0.0;
};

/// Full merge sequence (n - 1 merges) for an agglomerative method.
/// Equal merge distances resolve to the lexicographically smallest
/// (kept, absorbed) pair. Throws InitError for zero rows under cosine.
std::vector<Merge> build_merge_tree(const DataMatrix& data, const InitMethod& method);

/// Partition after the first n - k merges, labelled by smallest member index.
Labels cut_merge_tree(const std::vector<Merge>& merges, std::size_t n, int k);

/// Bottom-up clustering down to k clusters.
Labels agglomerate(const DataMatrix& data, int k, const InitMethod& method);

/// Best of `reps` runs of k-means++ seeding followed by Lloyd iterations.
Labels kmeans_init(const DataMatrix& data, int k, int reps, std::uint64_t seed);

/// Within-cluster sum of squares of a labelling.
double kmeans_inertia(const DataMatrix& data, const Labels& labels);

/// Extends a labelling of `subset_rows` to all rows: subset rows keep their
/// label, every other row goes to the nearest subset-cluster mean.
Labels extend_labels(const DataMatrix& data, const std::vector<std::size_t>& subset_rows,
                     const Labels& subset_labels);

/// Per-cluster weight, mean and regularized covariance, plus its inverse.
/// Throws InitError for empty clusters or a covariance that cannot be inverted.
InitParams estimate_gaussian_parameters(const DataMatrix& data, const Labels& labels,
                                        CovarianceConstraint constraint, double reg_covar);

}  // namespace autogmm

#endif  // AUTOGMM_INIT_HPP
