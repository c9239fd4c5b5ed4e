#include "autogmm/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "autogmm/parallel.hpp"

namespace autogmm {

namespace {

// Cell index reserved for the shared agglomeration subset.
constexpr std::uint64_t kSubsetCell = ~std::uint64_t{0};

bool has_small_cluster(const Labels& labels, int k) {
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return std::any_of(counts.begin(), counts.end(), [](int c) { return c < 2; });
}

// Starting partition for one (k, method) pair, or why there is none.
struct InitSlot {
  std::optional<Labels> labels;
  std::string failure;
};

}  // namespace

double increase_reg(double reg) {
  if (reg == 0.0) return kRegLadder[1];
  for (std::size_t i = 1; i + 1 < kRegLadder.size(); ++i) {
    if (reg == kRegLadder[i]) return kRegLadder[i + 1];
  }
  return reg * 10.0;
}

std::vector<InitMethod> SearchConfig::methods() const { return methods_from(affinities, linkages); }

std::vector<CovarianceConstraint> SearchConfig::constraint_set() const {
  std::vector<CovarianceConstraint> out;
  for (auto c : kAllConstraints) {
    if (std::find(constraints.begin(), constraints.end(), c) != constraints.end()) out.push_back(c);
  }
  return out;
}

void SearchConfig::validate() const {
  if (kmin < 1) throw InputError("kmin must be >= 1");
  if (kmax < kmin) throw InputError("kmax must be >= kmin");
  if (affinities.empty()) throw InputError("no affinities selected");
  const bool only_none = std::all_of(affinities.begin(), affinities.end(),
                                     [](Affinity a) { return a == Affinity::none; });
  if (linkages.empty() && !only_none) throw InputError("no linkages selected");
  if (methods().empty()) {
    throw InputError("the affinity/linkage selection leaves no valid method (ward needs l2)");
  }
  if (constraints.empty()) throw InputError("no covariance constraints selected");
  if (subset_cap < 1) throw InputError("subset cap must be >= 1");
  if (kmeans_reps < 1) throw InputError("kmeans reps must be >= 1");
  em.validate();
}

bool candidate_precedes(const CandidateResult& a, const CandidateResult& b) {
  if (a.converged() != b.converged()) return a.converged();
  if (a.converged()) {
    if (*a.criterion_value != *b.criterion_value) return *a.criterion_value > *b.criterion_value;
  }
  if (a.k != b.k) return a.k < b.k;
  if (a.constraint != b.constraint) return a.constraint < b.constraint;
  return canonical_index(a.method) < canonical_index(b.method);
}

CandidateResult gaussian_cluster(const DataMatrix& data, int k, CovarianceConstraint constraint,
                                 const std::optional<Labels>& init, const EmSettings& em,
                                 Criterion criterion) {
  CandidateResult out;
  out.k = k;
  out.constraint = constraint;
  out.status = CandidateStatus::failed;
  const auto n = static_cast<long>(data.rows());
  if (k < 1 || k > n) {
    out.failure_reason = "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n);
    return out;
  }
  if (k > 1 && !init) {
    out.failure_reason = "no initial partition";
    return out;
  }

  if (k > 1) {
    if (init->size() != static_cast<std::size_t>(n)) {
      throw InputError("initial partition length does not match the number of samples");
    }
    if (label_count(*init) != k) {
      out.failure_reason = "initial partition has " + std::to_string(label_count(*init)) +
                           " clusters, expected " + std::to_string(k);
      return out;
    }
  }

  std::string last_error;
  double reg = 0.0;
  while (reg <= kRegCeiling) {
    out.reg_covar = reg;
    try {
      EmSettings settings = em;
      settings.reg_covar = reg;
      std::optional<GmmModel> start;
      if (k > 1) start = estimate_gaussian_parameters(data, *init, constraint, reg).model;
      FitResult fit = em_fit(data, k, constraint, settings, start);
      if (has_small_cluster(fit.labels, k)) {
        last_error = "a cluster has fewer than two points";
      } else {
        out.criterion_value = criterion_value(fit, n, criterion);
        out.fit = std::move(fit);
        out.status = CandidateStatus::converged;
        out.failure_reason.clear();
        return out;
      }
    } catch (const InitError& e) {
      last_error = e.what();
    } catch (const NumericError& e) {
      last_error = e.what();
    }
    reg = increase_reg(reg);
  }
  out.failure_reason = "regularization ladder exhausted (" + last_error + ")";
  return out;
}

SearchResult autogmm_search(const DataMatrix& data, const SearchConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < 2) throw InputError("model search needs at least 2 samples");
  if (data.cols() < 1) throw InputError("data has no columns");
  if (!data.allFinite()) throw InputError("data contains non-finite values");

  const std::vector<InitMethod> methods = config.methods();
  const std::vector<CovarianceConstraint> constraints = config.constraint_set();
  const int k_count = config.kmax - config.kmin + 1;
  const std::size_t m_count = methods.size();
  const int threads = config.threads;

  SearchResult result;
  std::vector<std::size_t> subset_rows;
  DataMatrix subset;
  const bool any_agglomerative =
      std::any_of(methods.begin(), methods.end(), [](const InitMethod& m) { return !m.is_kmeans(); });
  if (any_agglomerative && config.kmax > 1) {
    subset_rows = subset_indices(n, config.subset_cap, derive_seed(config.seed, kSubsetCell, 0));
    subset = select_rows(data, subset_rows);
    result.max_agglomeration_rows = subset_rows.size();
  }

  // Starting partitions for every (k, method); index = (k - kmin) * m_count + m.
  std::vector<InitSlot> inits(static_cast<std::size_t>(k_count) * m_count);
  auto slot = [&](int k, std::size_t m) -> InitSlot& {
    return inits[static_cast<std::size_t>(k - config.kmin) * m_count + m];
  };

  // One merge tree per agglomerative method serves every k.
  parallel_for(m_count, threads, [&](std::size_t m) {
    const InitMethod& method = methods[m];
    if (method.is_kmeans() || config.kmax < 2) return;
    std::vector<Merge> tree;
    std::string failure;
    try {
      tree = build_merge_tree(subset, method);
    } catch (const InitError& e) {
      failure = e.what();
    }
    for (int k = std::max(2, config.kmin); k <= config.kmax; ++k) {
      InitSlot& s = slot(k, m);
      if (!failure.empty()) {
        s.failure = method.name() + ": " + failure;
      } else if (static_cast<std::size_t>(k) > subset_rows.size()) {
        s.failure = "k=" + std::to_string(k) + " exceeds the " +
                    std::to_string(subset_rows.size()) + " agglomerated rows";
      } else {
        s.labels = extend_labels(data, subset_rows, cut_merge_tree(tree, subset_rows.size(), k));
      }
    }
  });

  // k-means partitions, one per k.
  const auto kmeans_pos = std::find_if(methods.begin(), methods.end(),
                                       [](const InitMethod& m) { return m.is_kmeans(); });
  if (kmeans_pos != methods.end()) {
    const auto m = static_cast<std::size_t>(kmeans_pos - methods.begin());
    const int first_k = std::max(2, config.kmin);
    parallel_for(static_cast<std::size_t>(std::max(0, config.kmax - first_k + 1)), threads,
                 [&](std::size_t i) {
                   const int k = first_k + static_cast<int>(i);
                   InitSlot& s = slot(k, m);
                   if (static_cast<std::size_t>(k) > n) {
                     s.failure = "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n);
                     return;
                   }
                   // Keyed by (k, method) alone so narrowing the grid keeps the seeds.
                   const std::uint64_t cell =
                       static_cast<std::uint64_t>(k) * all_init_methods().size() +
                       static_cast<std::uint64_t>(canonical_index(methods[m]));
                   s.labels = kmeans_init(data, k, config.kmeans_reps,
                                          derive_seed(config.seed, cell, 1));
                 });
  }

  const std::size_t c_count = constraints.size();
  result.grid.resize(static_cast<std::size_t>(k_count) * m_count * c_count);
  parallel_for(result.grid.size(), threads, [&](std::size_t idx) {
    const std::size_t c = idx % c_count;
    const std::size_t m = (idx / c_count) % m_count;
    const int k = config.kmin + static_cast<int>(idx / (c_count * m_count));
    CandidateResult cand;
    if (k == 1) {
      cand = gaussian_cluster(data, 1, constraints[c], std::nullopt, config.em, config.criterion);
    } else {
      const InitSlot& s = slot(k, m);
      if (s.labels) {
        cand = gaussian_cluster(data, k, constraints[c], s.labels, config.em, config.criterion);
      } else {
        cand.k = k;
        cand.constraint = constraints[c];
        cand.failure_reason = s.failure.empty() ? "no initial partition" : s.failure;
      }
    }
    cand.method = methods[m];
    result.grid[idx] = std::move(cand);
  });

  const CandidateResult* best = nullptr;
  for (const auto& cand : result.grid) {
    if (cand.converged() && (best == nullptr || candidate_precedes(cand, *best))) best = &cand;
  }
  if (best == nullptr) {
    std::map<std::string, int> reasons;
    for (const auto& cand : result.grid) ++reasons[cand.failure_reason];
    std::ostringstream msg;
    msg << "all " << result.grid.size() << " candidate fits failed:";
    for (const auto& [reason, count] : reasons) msg << "\n  " << count << "x " << reason;
    throw SearchError(msg.str());
  }
  result.best = *best;
  return result;
}

}  // namespace autogmm
