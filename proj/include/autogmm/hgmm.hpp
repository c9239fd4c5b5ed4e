#ifndef AUTOGMM_HGMM_HPP
#define AUTOGMM_HGMM_HPP

#include <optional>
#include <string>
#include <vector>

#include "autogmm/search.hpp"

namespace autogmm {

enum class LeafReason {
  none,            // internal node
  k1,              // the search preferred a single component
  min_split,       // too few points to split
  search_failure,  // every candidate failed
  depth_cap,       // configured depth limit reached
};

std::string_view to_string(LeafReason r);

struct DendrogramNode {
  std::vector<std::size_t> indices;  // rows of the root data matrix, ascending
  int depth = 0;
  std::optional<CandidateResult> selection;  // search winner at this node
  LeafReason leaf_reason = LeafReason::none;
  std::string failure;
  std::vector<DendrogramNode> children;  // ordered by smallest member index

  bool is_leaf() const { return children.empty(); }
  const GmmModel* model() const {
    return selection && selection->fit ? &selection->fit->model : nullptr;
  }
};

struct HgmmConfig {
  SearchConfig search;  // kmin/kmax are overridden per node
  int max_components = 2;
  int min_split = 0;    // 0: 2 * max_components
  int max_depth = -1;   // -1: unlimited

  int effective_min_split() const { return min_split > 0 ? min_split : 2 * max_components; }
  void validate() const;
};

/// Recursive model search: every node is searched with k in [1, max_components]
/// and split by the winning labels until k = 1 wins or a guard fires.
DendrogramNode hgmm_fit(const DataMatrix& data, const HgmmConfig& config);

/// Flat clustering from truncating every branch at depth d. Labels are ordered
/// by each cluster's smallest member index.
Labels cut_at_depth(const DendrogramNode& root, int d);

/// Depth of the deepest node.
int tree_depth(const DendrogramNode& root);

/// Leaves in left-to-right order.
std::vector<const DendrogramNode*> leaves(const DendrogramNode& root);

}  // namespace autogmm

#endif  // AUTOGMM_HGMM_HPP
