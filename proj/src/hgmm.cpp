#include "autogmm/hgmm.hpp"

#include <algorithm>
#include <functional>

namespace autogmm {

namespace {

DendrogramNode fit_node(const DataMatrix& data, std::vector<std::size_t> indices, int depth,
                        std::uint64_t seed, const HgmmConfig& config) {
  DendrogramNode node;
  node.indices = std::move(indices);
  node.depth = depth;

  if (node.indices.size() < static_cast<std::size_t>(config.effective_min_split())) {
    node.leaf_reason = LeafReason::min_split;
    return node;
  }
  if (config.max_depth >= 0 && depth >= config.max_depth) {
    node.leaf_reason = LeafReason::depth_cap;
    return node;
  }

  SearchConfig search = config.search;
  search.kmin = 1;
  search.kmax = config.max_components;
  search.seed = seed;

  const DataMatrix rows = select_rows(data, node.indices);
  SearchResult found;
  try {
    found = autogmm_search(rows, search);
  } catch (const SearchError& e) {
    node.leaf_reason = LeafReason::search_failure;
    node.failure = e.what();
    return node;
  }
  node.selection = std::move(found.best);
  // Only the winning fit is kept; the rest of the grid is dropped here.
  if (node.selection->k == 1) {
    node.leaf_reason = LeafReason::k1;
    return node;
  }

  const Labels& labels = node.selection->fit->labels;
  const int k = node.selection->k;
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[static_cast<std::size_t>(labels[i])].push_back(node.indices[i]);
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  if (groups.size() < 2) {
    node.leaf_reason = LeafReason::k1;
    return node;
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < groups.size(); ++c) {
    node.children.push_back(fit_node(data, std::move(groups[c]), depth + 1,
                                     derive_seed(seed, c + 1, static_cast<std::uint64_t>(depth)),
                                     config));
  }
  return node;
}

}  // namespace

std::string_view to_string(LeafReason r) {
  switch (r) {
    case LeafReason::none: return "none";
    case LeafReason::k1: return "k1";
    case LeafReason::min_split: return "min_split";
    case LeafReason::search_failure: return "search_failure";
    case LeafReason::depth_cap: return "depth_cap";
  }
  return "?";
}

void HgmmConfig::validate() const {
  if (max_components < 2) throw InputError("max_components must be >= 2");
  if (min_split < 0) throw InputError("min_split must be >= 0");
  SearchConfig s = search;
  s.kmin = 1;
  s.kmax = max_components;
  s.validate();
}

DendrogramNode hgmm_fit(const DataMatrix& data, const HgmmConfig& config) {
  config.validate();
  if (data.rows() < 1) throw InputError("hierarchical fit needs at least one sample");
  std::vector<std::size_t> all(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_node(data, std::move(all), 0, config.search.seed, config);
}

Labels cut_at_depth(const DendrogramNode& root, int d) {
  if (d < 0) throw InputError("cut depth must be >= 0");
  std::vector<const DendrogramNode*> clusters;
  std::function<void(const DendrogramNode&)> walk = [&](const DendrogramNode& node) {
    if (node.depth >= d || node.is_leaf()) {
      clusters.push_back(&node);
      return;
    }
    for (const auto& child : node.children) walk(child);
  };
  walk(root);
  std::sort(clusters.begin(), clusters.end(), [](const auto* a, const auto* b) {
    return a->indices.front() < b->indices.front();
  });
  std::size_t n = 0;
  for (const auto* c : clusters) n += c->indices.size();
  Labels labels(n, -1);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t i : clusters[c]->indices) labels[i] = static_cast<int>(c);
  }
  return labels;
}

int tree_depth(const DendrogramNode& root) {
  int depth = root.depth;
  for (const auto& child : root.children) depth = std::max(depth, tree_depth(child));
  return depth;
}

std::vector<const DendrogramNode*> leaves(const DendrogramNode& root) {
  std::vector<const DendrogramNode*> out;
  std::function<void(const DendrogramNode&)> walk = [&](const DendrogramNode& node) {
    if (node.is_leaf()) {
      out.push_back(&node);
      return;
    }
    for (const auto& child : node.children) walk(child);
  };
  walk(root);
  return out;
}

}  // namespace autogmm
