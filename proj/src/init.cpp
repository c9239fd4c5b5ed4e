#include "autogmm/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace autogmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper triangle of a symmetric n x n matrix, row by row.
class CondensedMatrix {
 public:
  explicit CondensedMatrix(std::size_t n) : n_(n), values_(n * (n - 1) / 2) {}

  double& operator()(std::size_t i, std::size_t j) { return values_[index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[index(i, j)]; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_;
  std::vector<double> values_;
};

double point_distance(const DataMatrix& data, Eigen::Index a, Eigen::Index b, Affinity affinity,
                      const Eigen::VectorXd& norms) {
  switch (affinity) {
    case Affinity::l2: return (data.row(a) - data.row(b)).norm();
    case Affinity::l1: return (data.row(a) - data.row(b)).cwiseAbs().sum();
    case Affinity::cosine: return 1.0 - data.row(a).dot(data.row(b)) / (norms(a) * norms(b));
    case Affinity::none: break;
  }
  throw InputError("agglomeration needs an affinity other than none");
}

double lance_williams(Linkage linkage, double d_ki, double d_kj, double d_ij, double n_i,
                      double n_j, double n_k) {
  switch (linkage) {
    case Linkage::single: return std::min(d_ki, d_kj);
    case Linkage::complete: return std::max(d_ki, d_kj);
    case Linkage::average: return (n_i * d_ki + n_j * d_kj) / (n_i + n_j);
    case Linkage::ward:
      return ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k);
  }
  return kInf;
}

Labels canonical_relabel(const Labels& raw) {
  std::vector<int> remap(raw.size() + 1, -1);
  Labels out(raw.size());
  int next = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto r = static_cast<std::size_t>(raw[i]);
    if (remap[r] < 0) remap[r] = next++;
    out[i] = remap[r];
  }
  return out;
}

Labels kmeans_once(const DataMatrix& data, int k, std::uint64_t seed, double& inertia_out) {
  constexpr int kMaxIter = 300;
  constexpr double kRelTol = 1e-4;
  const Eigen::Index n = data.rows();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centers(k, data.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  Eigen::Index first = pick(rng);
  centers.row(0) = data.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  Eigen::VectorXd d2 = (data.rowwise() - data.row(first)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index next = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0.0 && d2(i) > 0.0) {
          next = i;
          break;
        }
      }
      if (next < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            next = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a center: fall back to an unused row.
      std::vector<Eigen::Index> unused;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> pu(0, unused.size() - 1);
      next = unused[pu(rng)];
    }
    centers.row(c) = data.row(next);
    chosen[static_cast<std::size_t>(next)] = 1;
    d2 = d2.cwiseMin((data.rowwise() - data.row(next)).rowwise().squaredNorm());
  }

  Labels labels(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd best_d2(n);
  double prev_inertia = kInf;
  double inertia = kInf;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = kInf;
      for (int c = 0; c < k; ++c) {
        const double dist = (data.row(i) - centers.row(c)).squaredNorm();
        if (dist < bd) {
          bd = dist;
          best = c;
        }
      }
      best_d2(i) = bd;
      auto& slot = labels[static_cast<std::size_t>(i)];
      if (slot != best) changed = true;
      slot = best;
    }
    inertia = best_d2.sum();

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += data.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    bool relocated = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move its center onto the worst-served point.
      Eigen::Index far = 0;
      best_d2.maxCoeff(&far);
      centers.row(c) = data.row(far);
      best_d2(far) = 0.0;
      relocated = true;
    }
    if (!relocated && iter > 0 &&
        (!changed || prev_inertia - inertia <= kRelTol * prev_inertia)) {
      break;
    }
    prev_inertia = inertia;
  }

  // Final assignment against the last centers.
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double bd = kInf;
    for (int c = 0; c < k; ++c) {
      const double dist = (data.row(i) - centers.row(c)).squaredNorm();
      if (dist < bd) {
        bd = dist;
        best = c;
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  inertia_out = kmeans_inertia(data, labels);
  return labels;
}

}  // namespace

std::string_view to_string(Affinity a) {
  switch (a) {
    case Affinity::l2: return "l2";
    case Affinity::l1: return "l1";
    case Affinity::cosine: return "cosine";
    case Affinity::none: return "none";
  }
  return "?";
}

std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::ward: return "ward";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
    case Linkage::single: return "single";
  }
  return "?";
}

Affinity parse_affinity(std::string_view name) {
  if (name == "l2" || name == "L2" || name == "euclidean") return Affinity::l2;
  if (name == "l1" || name == "L1" || name == "manhattan") return Affinity::l1;
  if (name == "cosine") return Affinity::cosine;
  if (name == "none") return Affinity::none;
  throw InputError("unknown affinity '" + std::string(name) + "'");
}

Linkage parse_linkage(std::string_view name) {
  if (name == "ward") return Linkage::ward;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  if (name == "single") return Linkage::single;
  throw InputError("unknown linkage '" + std::string(name) + "'");
}

bool InitMethod::valid() const {
  if (affinity == Affinity::none) return !linkage.has_value();
  if (!linkage) return false;
  return *linkage != Linkage::ward || affinity == Affinity::l2;
}

std::string InitMethod::name() const {
  if (is_kmeans()) return "none";
  return std::string(to_string(affinity)) + "-" +
         std::string(linkage ? to_string(*linkage) : "?");
}

const std::vector<InitMethod>& all_init_methods() {
  static const std::vector<InitMethod> methods = [] {
    std::vector<InitMethod> m;
    for (Affinity a : {Affinity::l2, Affinity::l1, Affinity::cosine}) {
      for (Linkage l : {Linkage::ward, Linkage::complete, Linkage::average, Linkage::single}) {
        InitMethod im{a, l};
        if (im.valid()) m.push_back(im);
      }
    }
    m.push_back(InitMethod{Affinity::none, std::nullopt});
    return m;
  }();
  return methods;
}

int canonical_index(const InitMethod& m) {
  const auto& all = all_init_methods();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] == m) return static_cast<int>(i);
  }
  throw InputError("invalid initialization method '" + m.name() + "'");
}

std::vector<InitMethod> methods_from(const std::vector<Affinity>& affinities,
                                     const std::vector<Linkage>& linkages) {
  std::vector<InitMethod> out;
  for (const auto& m : all_init_methods()) {
    const bool a_ok = std::find(affinities.begin(), affinities.end(), m.affinity) !=
                      affinities.end();
    const bool l_ok = m.is_kmeans() ||
                      std::find(linkages.begin(), linkages.end(), *m.linkage) != linkages.end();
    if (a_ok && l_ok) out.push_back(m);
  }
  return out;
}

std::vector<std::size_t> subset_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw InputError("subset cap must be >= 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `cap` slots end up a uniform sample.
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

DataMatrix subset_data(const DataMatrix& data, std::size_t cap, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n <= cap) return data;
  return select_rows(data, subset_indices(n, cap, seed));
}

std::vector<Merge> build_merge_tree(const DataMatrix& data, const InitMethod& method) {
  if (!method.valid() || method.is_kmeans()) {
    throw InputError("agglomeration needs a valid affinity/linkage pair, got '" + method.name() +
                     "'");
  }
  const auto n = static_cast<std::size_t>(data.rows());
  if (n == 0) throw InputError("cannot agglomerate an empty matrix");
  const Linkage linkage = *method.linkage;

  Eigen::VectorXd norms;
  if (method.affinity == Affinity::cosine) {
    norms = data.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
      if (norms(i) == 0.0) {
        throw InitError("cosine affinity is undefined for the all-zero row " + std::to_string(i));
      }
    }
  }

  std::vector<Merge> merges;
  if (n == 1) return merges;
  merges.reserve(n - 1);

  CondensedMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = point_distance(data, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                                method.affinity, norms);
      // Ward works on the within-cluster sum-of-squares increase.
      if (linkage == Linkage::ward) v = 0.5 * v * v;
      dist(i, j) = v;
    }
  }

  std::vector<char> active(n, 1);
  std::vector<double> size(n, 1.0);
  // Nearest active neighbour with a larger index, per active row.
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, kInf);

  auto rescan = [&](std::size_t r) {
    nn[r] = n;
    nn_dist[r] = kInf;
    for (std::size_t c = r + 1; c < n; ++c) {
      if (!active[c]) continue;
      const double v = dist(r, c);
      if (v < nn_dist[r]) {
        nn_dist[r] = v;
        nn[r] = c;
      }
    }
  };
  for (std::size_t r = 0; r + 1 < n; ++r) rescan(r);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = n;
    double best = kInf;
    for (std::size_t r = 0; r < n; ++r) {
      if (active[r] && nn[r] < n && (a == n || nn_dist[r] < best)) {
        best = nn_dist[r];
        a = r;
      }
    }
    const std::size_t b = nn[a];
    merges.push_back(Merge{static_cast<int>(a), static_cast<int>(b), best});

    const double d_ab = dist(a, b);
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      dist(a, c) = lance_williams(linkage, dist(a, c), dist(b, c), d_ab, size[a], size[b], size[c]);
    }
    active[b] = 0;
    size[a] += size[b];

    for (std::size_t r = 0; r < n; ++r) {
      if (!active[r]) continue;
      if (r == a || nn[r] == a || nn[r] == b) {
        rescan(r);
      } else if (r < a) {
        const double v = dist(r, a);
        if (v < nn_dist[r] || (v == nn_dist[r] && a < nn[r])) {
          nn_dist[r] = v;
          nn[r] = a;
        }
      }
    }
  }
  return merges;
}

Labels cut_merge_tree(const std::vector<Merge>& merges, std::size_t n, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw InputError("cannot cut " + std::to_string(n) + " points into " + std::to_string(k) +
                     " clusters");
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  const std::size_t steps = n - static_cast<std::size_t>(k);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto ra = find(static_cast<std::size_t>(merges[s].kept));
    const auto rb = find(static_cast<std::size_t>(merges[s].absorbed));
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  Labels raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<int>(find(i));
  return canonical_relabel(raw);
}

Labels agglomerate(const DataMatrix& data, int k, const InitMethod& method) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw InputError("agglomerate needs 1 <= k <= n (k=" + std::to_string(k) +
                     ", n=" + std::to_string(n) + ")");
  }
  return cut_merge_tree(build_merge_tree(data, method), n, k);
}

double kmeans_inertia(const DataMatrix& data, const Labels& labels) {
  const int k = label_count(labels);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    sums.row(labels[static_cast<std::size_t>(i)]) += data.row(i);
    counts(labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    total += (data.row(i) - sums.row(c) / counts(c)).squaredNorm();
  }
  return total;
}

Labels kmeans_init(const DataMatrix& data, int k, int reps, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  if (k < 1 || k > n) {
    throw InputError("k-means needs 1 <= k <= n (k=" + std::to_string(k) +
                     ", n=" + std::to_string(n) + ")");
  }
  if (reps < 1) throw InputError("k-means needs reps >= 1");
  if (k == 1) return Labels(static_cast<std::size_t>(n), 0);
  Labels best;
  double best_inertia = kInf;
  for (int r = 0; r < reps; ++r) {
    double inertia = 0.0;
    Labels labels = kmeans_once(data, k, derive_seed(seed, static_cast<std::uint64_t>(k),
                                                     static_cast<std::uint64_t>(r)),
                                inertia);
    if (best.empty() || inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(labels);
    }
  }
  return canonical_relabel(best);
}

Labels extend_labels(const DataMatrix& data, const std::vector<std::size_t>& subset_rows,
                     const Labels& subset_labels) {
  if (subset_rows.size() != subset_labels.size()) {
    throw InputError("subset rows and labels differ in length");
  }
  const auto n = static_cast<std::size_t>(data.rows());
  if (subset_rows.size() == n) return subset_labels;

  const int k = label_count(subset_labels);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, data.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (std::size_t s = 0; s < subset_rows.size(); ++s) {
    means.row(subset_labels[s]) += data.row(static_cast<Eigen::Index>(subset_rows[s]));
    counts(subset_labels[s]) += 1.0;
  }
  means.array().colwise() /= counts.array();

  Labels out(n, -1);
  for (std::size_t s = 0; s < subset_rows.size(); ++s) out[subset_rows[s]] = subset_labels[s];
  for (std::size_t i = 0; i < n; ++i) {
    if (out[i] >= 0) continue;
    int best = 0;
    double bd = kInf;
    for (int c = 0; c < k; ++c) {
      const double d2 = (data.row(static_cast<Eigen::Index>(i)) - means.row(c)).squaredNorm();
      if (d2 < bd) {
        bd = d2;
        best = c;
      }
    }
    out[i] = best;
  }
  return out;
}

InitParams estimate_gaussian_parameters(const DataMatrix& data, const Labels& labels,
                                        CovarianceConstraint constraint, double reg_covar) {
  const Eigen::Index n = data.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw InputError("labels length does not match the number of samples");
  }
  const int k = label_count(labels);
  if (k < 1) throw InputError("no labels");
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0) throw InputError("labels must be nonnegative");
    ++counts[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw InitError("cluster " + std::to_string(c) + " of the initial partition is empty");
    }
  }

  const int dim = static_cast<int>(data.cols());
  GmmModel model;
  model.constraint = constraint;
  model.reg_covar = reg_covar;
  model.weights.resize(k);
  model.means = Eigen::MatrixXd::Zero(k, dim);
  for (Eigen::Index i = 0; i < n; ++i) model.means.row(labels[static_cast<std::size_t>(i)]) += data.row(i);
  for (int c = 0; c < k; ++c) {
    model.weights(c) = static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(n);
    model.means.row(c) /= counts[static_cast<std::size_t>(c)];
  }

  std::vector<Eigen::MatrixXd> scatter(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(dim, dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    const Eigen::VectorXd diff = (data.row(i) - model.means.row(c)).transpose();
    scatter[static_cast<std::size_t>(c)] += diff * diff.transpose();
  }

  InitParams out;
  switch (constraint) {
    case CovarianceConstraint::full: {
      model.covariances.resize(static_cast<Eigen::Index>(k) * dim, dim);
      out.precisions.resize(static_cast<Eigen::Index>(k) * dim, dim);
      for (int c = 0; c < k; ++c) {
        Eigen::MatrixXd cov = scatter[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
        cov.diagonal().array() += reg_covar;
        model.covariances.block(c * dim, 0, dim, dim) = cov;
      }
      break;
    }
    case CovarianceConstraint::tied: {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
      for (const auto& s : scatter) cov += s;
      cov /= static_cast<double>(n);
      cov.diagonal().array() += reg_covar;
      model.covariances = cov;
      break;
    }
    case CovarianceConstraint::diag:
    case CovarianceConstraint::spherical: {
      Eigen::MatrixXd var(k, dim);
      for (int c = 0; c < k; ++c) {
        var.row(c) = scatter[static_cast<std::size_t>(c)].diagonal().transpose() /
                     counts[static_cast<std::size_t>(c)];
      }
      if (constraint == CovarianceConstraint::diag) {
        model.covariances = var.array() + reg_covar;
      } else {
        model.covariances = var.rowwise().mean().array() + reg_covar;
      }
      break;
    }
  }

  auto invert = [](const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      throw InitError(std::string(what) + " covariance is not invertible at this regularization");
    }
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    if (!inv.allFinite()) {
      throw InitError(std::string(what) + " covariance is not invertible at this regularization");
    }
    return inv;
  };

  switch (constraint) {
    case CovarianceConstraint::full:
      for (int c = 0; c < k; ++c) {
        out.precisions.block(c * dim, 0, dim, dim) =
            invert(model.covariances.block(c * dim, 0, dim, dim), "cluster");
      }
      break;
    case CovarianceConstraint::tied:
      out.precisions = invert(model.covariances, "pooled");
      break;
    case CovarianceConstraint::diag:
    case CovarianceConstraint::spherical:
      if (!(model.covariances.array() > 0.0).all() || !model.covariances.allFinite()) {
        throw InitError("cluster variance is zero at this regularization");
      }
      out.precisions = model.covariances.cwiseInverse();
      break;
  }
  out.model = std::move(model);
  return out;
}

}  // namespace autogmm
