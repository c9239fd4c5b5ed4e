#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "test_util.hpp"

#include "autogmm/init.hpp"

using namespace autogmm;

namespace {

double raw_distance(const DataMatrix& x, int a, int b, Affinity aff) {
  double s = 0.0;
  if (aff == Affinity::cosine) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      dot += x(a, j) * x(b, j);
      na += x(a, j) * x(a, j);
      nb += x(b, j) * x(b, j);
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  }
  for (int j = 0; j < x.cols(); ++j) {
    const double diff = x(a, j) - x(b, j);
    s += aff == Affinity::l1 ? std::abs(diff) : diff * diff;
  }
  return aff == Affinity::l1 ? s : std::sqrt(s);
}

// Linkage value computed from the member lists directly.
double cluster_distance(const DataMatrix& x, const std::vector<int>& p, const std::vector<int>& q,
                        const InitMethod& m) {
  if (*m.linkage == Linkage::ward) {
    Eigen::RowVectorXd mp = Eigen::RowVectorXd::Zero(x.cols()), mq = mp;
    for (int i : p) mp += x.row(i);
    for (int i : q) mq += x.row(i);
    mp /= static_cast<double>(p.size());
    mq /= static_cast<double>(q.size());
    const double np = static_cast<double>(p.size()), nq = static_cast<double>(q.size());
    return np * nq / (np + nq) * (mp - mq).squaredNorm();
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  for (int a : p)
    for (int b : q) {
      const double v = raw_distance(x, a, b, m.affinity);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
  if (*m.linkage == Linkage::single) return lo;
  if (*m.linkage == Linkage::complete) return hi;
  return sum / static_cast<double>(p.size() * q.size());
}

Labels to_labels(const std::vector<std::vector<int>>& clusters, int n) {
  Labels raw(static_cast<std::size_t>(n));
  for (const auto& c : clusters)
    for (int i : c) raw[static_cast<std::size_t>(i)] = c.front();
  std::map<int, int> ids;
  Labels out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto it = ids.emplace(raw[i], static_cast<int>(ids.size())).first;
    out[i] = it->second;
  }
  return out;
}

// Naive agglomeration: recompute every pairwise cluster distance at every step.
// Returns the partition for each k = n..1 and the merge distances.
std::pair<std::map<int, Labels>, std::vector<double>> naive_agglomerate(const DataMatrix& x,
                                                                        const InitMethod& m) {
  const int n = static_cast<int>(x.rows());
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({i});
  std::map<int, Labels> parts;
  std::vector<double> dists;
  parts[n] = to_labels(clusters, n);
  while (clusters.size() > 1) {
    std::size_t bp = 0, bq = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < clusters.size(); ++p)
      for (std::size_t q = p + 1; q < clusters.size(); ++q) {
        const double v = cluster_distance(x, clusters[p], clusters[q], m);
        if (v < best) {
          best = v;
          bp = p;
          bq = q;
        }
      }
    dists.push_back(best);
    clusters[bp].insert(clusters[bp].end(), clusters[bq].begin(), clusters[bq].end());
    std::sort(clusters[bp].begin(), clusters[bp].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bq));
    parts[static_cast<int>(clusters.size())] = to_labels(clusters, n);
  }
  return {parts, dists};
}

bool is_partition(const Labels& l, int k) {
  std::set<int> seen(l.begin(), l.end());
  return static_cast<int>(seen.size()) == k && *seen.begin() == 0 && *seen.rbegin() == k - 1;
}

}  // namespace

TEST_CASE("eleven initialization methods in canonical order") {
  const auto& all = all_init_methods();
  REQUIRE(all.size() == 11);
  const std::vector<std::string> names = {"l2-ward",       "l2-complete",    "l2-average",
                                          "l2-single",     "l1-complete",    "l1-average",
                                          "l1-single",     "cosine-complete", "cosine-average",
                                          "cosine-single", "none"};
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].name() == names[i]);
    CHECK(canonical_index(all[i]) == static_cast<int>(i));
    CHECK(all[i].valid());
  }
  CHECK_FALSE((InitMethod{Affinity::l1, Linkage::ward}).valid());
  CHECK_FALSE((InitMethod{Affinity::none, Linkage::ward}).valid());
  CHECK_FALSE((InitMethod{Affinity::l2, std::nullopt}).valid());
  const auto some = methods_from({Affinity::none, Affinity::l1}, {Linkage::ward, Linkage::single});
  REQUIRE(some.size() == 2);
  CHECK(some[0].name() == "l1-single");
  CHECK(some[1].name() == "none");
}

TEST_CASE("subset sizes follow the strict cap") {
  auto idx = subset_indices(100, 2000, 1);
  CHECK(idx.size() == 100);
  idx = subset_indices(2000, 2000, 1);
  CHECK(idx.size() == 2000);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
  idx = subset_indices(5000, 2000, 42);
  CHECK(idx.size() == 2000);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(idx.back() < 5000);
  CHECK(subset_indices(5000, 2000, 42) == idx);
  CHECK(subset_indices(5000, 2000, 43) != idx);

  std::mt19937_64 rng(1);
  const DataMatrix x = testutil::random_matrix(rng, 50, 2);
  const DataMatrix s = subset_data(x, 20, 5);
  const auto rows = subset_indices(50, 20, 5);
  REQUIRE(s.rows() == 20);
  for (int i = 0; i < 20; ++i) CHECK(s.row(i) == x.row(static_cast<int>(rows[static_cast<std::size_t>(i)])));
}

TEST_CASE("nearest pair merges first") {
  DataMatrix x(3, 1);
  x << 0, 1, 10;
  CHECK(agglomerate(x, 2, {Affinity::l2, Linkage::single}) == Labels{0, 0, 1});
  CHECK(agglomerate(x, 3, {Affinity::l2, Linkage::single}) == Labels{0, 1, 2});
  CHECK(agglomerate(x, 1, {Affinity::l2, Linkage::ward}) == Labels{0, 0, 0});
}

TEST_CASE("agglomeration agrees with the naive oracle") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    DataMatrix x = testutil::random_matrix(rng, 20, 2);
    for (const auto& m : all_init_methods()) {
      if (m.is_kmeans()) continue;
      CAPTURE(m.name());
      const auto merges = build_merge_tree(x, m);
      REQUIRE(merges.size() == 19);
      const auto [parts, dists] = naive_agglomerate(x, m);
      for (int k = 1; k <= 20; ++k) {
        const Labels got = cut_merge_tree(merges, 20, k);
        CHECK(got == parts.at(k));
        CHECK(is_partition(got, k));
      }
      for (std::size_t s = 0; s < merges.size(); ++s) {
        CHECK(merges[s].kept < merges[s].absorbed);
        CHECK(merges[s].distance == doctest::Approx(dists[s]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("equal merge distances take the smallest index pair") {
  // Integer points: many exactly equal L1 distances.
  DataMatrix x(7, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5, 6, 5, 5, 6, 1, 1;
  for (Linkage l : {Linkage::single, Linkage::complete}) {
    const InitMethod m{Affinity::l1, l};
    const auto merges = build_merge_tree(x, m);
    const auto [parts, dists] = naive_agglomerate(x, m);
    CHECK(merges.front().kept == 0);
    CHECK(merges.front().absorbed == 1);
    for (int k = 1; k <= 7; ++k) CHECK(cut_merge_tree(merges, 7, k) == parts.at(k));
  }
}

TEST_CASE("cosine rejects zero rows") {
  DataMatrix x(3, 2);
  x << 1, 0, 0, 0, 0, 1;
  CHECK_THROWS_AS(build_merge_tree(x, {Affinity::cosine, Linkage::average}), InitError);
  CHECK_NOTHROW(build_merge_tree(x, {Affinity::l2, Linkage::average}));
  CHECK_THROWS_AS(build_merge_tree(x, {Affinity::l1, Linkage::ward}), InputError);
}

TEST_CASE("k-means edge cases") {
  std::mt19937_64 rng(8);
  const DataMatrix x = testutil::random_matrix(rng, 12, 2);
  const Labels all = kmeans_init(x, 12, 1, 3);
  CHECK(is_partition(all, 12));
  CHECK(kmeans_inertia(x, all) == 0.0);
  const Labels one = kmeans_init(x, 1, 1, 3);
  CHECK(std::all_of(one.begin(), one.end(), [](int l) { return l == 0; }));
  CHECK_THROWS_AS(kmeans_init(x, 13, 1, 3), InputError);
  CHECK_THROWS_AS(kmeans_init(x, 2, 0, 3), InputError);
}

TEST_CASE("k-means splits two far blobs by sign") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    DataMatrix x = testutil::blobs(rng, {{-10.0, -10.0}, {10.0, 10.0}}, 50, 0.1);
    const Labels got = kmeans_init(x, 2, 1, static_cast<std::uint64_t>(trial));
    for (int i = 0; i < x.rows(); ++i) CHECK(got[static_cast<std::size_t>(i)] == (x(i, 0) > 0.0 ? 1 : 0));
    // No point is closer to the other center.
    Eigen::RowVectorXd c[2] = {Eigen::RowVectorXd::Zero(2), Eigen::RowVectorXd::Zero(2)};
    for (int i = 0; i < x.rows(); ++i) c[got[static_cast<std::size_t>(i)]] += x.row(i) / 50.0;
    for (int i = 0; i < x.rows(); ++i) {
      const int own = got[static_cast<std::size_t>(i)];
      CHECK((x.row(i) - c[own]).norm() <= (x.row(i) - c[1 - own]).norm());
    }
  }
}

TEST_CASE("k-means is a function of its seed") {
  std::mt19937_64 rng(4);
  const DataMatrix x = testutil::random_matrix(rng, 200, 3);
  for (int k = 2; k <= 6; ++k) {
    const Labels a = kmeans_init(x, k, 3, 99);
    CHECK(a == kmeans_init(x, k, 3, 99));
    CHECK(is_partition(a, k));
    // More restarts never make the best inertia worse.
    CHECK(kmeans_inertia(x, kmeans_init(x, k, 5, 99)) <= kmeans_inertia(x, kmeans_init(x, k, 1, 99)) + 1e-9);
  }
}

TEST_CASE("extended labels keep the subset and use the nearest mean") {
  std::mt19937_64 rng(6);
  const DataMatrix x = testutil::blobs(rng, {{0.0}, {10.0}}, 30, 1.0);
  const auto rows = subset_indices(60, 20, 2);
  const DataMatrix sub = select_rows(x, rows);
  const Labels sub_labels = agglomerate(sub, 2, {Affinity::l2, Linkage::ward});
  const Labels full = extend_labels(x, rows, sub_labels);
  for (std::size_t s = 0; s < rows.size(); ++s) CHECK(full[rows[s]] == sub_labels[s]);
  double mean[2] = {0, 0}, cnt[2] = {0, 0};
  for (std::size_t s = 0; s < rows.size(); ++s) {
    mean[sub_labels[s]] += sub(static_cast<int>(s), 0);
    cnt[sub_labels[s]] += 1;
  }
  for (int c = 0; c < 2; ++c) mean[c] /= cnt[c];
  for (int i = 0; i < 60; ++i) {
    if (std::binary_search(rows.begin(), rows.end(), static_cast<std::size_t>(i))) continue;
    const int want = std::abs(x(i, 0) - mean[0]) <= std::abs(x(i, 0) - mean[1]) ? 0 : 1;
    CHECK(full[static_cast<std::size_t>(i)] == want);
  }
}

TEST_CASE("parameters from a partition") {
  DataMatrix x(4, 1);
  x << 0, 2, 10, 14;
  InitParams p = estimate_gaussian_parameters(x, {0, 0, 1, 1}, CovarianceConstraint::full, 0.0);
  CHECK(p.model.weights(0) == 0.5);
  CHECK(p.model.weights(1) == 0.5);
  CHECK(p.model.means(0, 0) == 1.0);
  CHECK(p.model.means(1, 0) == 12.0);
  p = estimate_gaussian_parameters(x, {0, 0, 0, 0}, CovarianceConstraint::spherical, 0.0);
  CHECK(p.model.weights(0) == 1.0);
  CHECK(p.model.means(0, 0) == 6.5);
  CHECK_THROWS_AS(estimate_gaussian_parameters(x, {0, 0, 2, 2}, CovarianceConstraint::full, 0.0), InitError);
}

TEST_CASE("parameters match group-by statistics") {
  std::mt19937_64 rng(30);
  const int n = 30, d = 3, k = 3;
  const DataMatrix x = testutil::random_matrix(rng, n, d);
  const Labels l = testutil::covering_labels(rng, n, k, d + 1);
  for (double reg : {0.0, 1e-3}) {
    std::vector<Eigen::RowVectorXd> mean(k, Eigen::RowVectorXd::Zero(d));
    std::vector<Eigen::MatrixXd> cov(k, Eigen::MatrixXd::Zero(d, d));
    std::vector<double> cnt(k, 0.0);
    for (int i = 0; i < n; ++i) {
      mean[static_cast<std::size_t>(l[static_cast<std::size_t>(i)])] += x.row(i);
      cnt[static_cast<std::size_t>(l[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int c = 0; c < k; ++c) mean[static_cast<std::size_t>(c)] /= cnt[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(l[static_cast<std::size_t>(i)]);
      for (int r = 0; r < d; ++r)
        for (int s = 0; s < d; ++s) cov[c](r, s) += (x(i, r) - mean[c](r)) * (x(i, s) - mean[c](s)) / cnt[c];
    }
    for (auto con : kAllConstraints) {
      CAPTURE(to_string(con));
      const InitParams p = estimate_gaussian_parameters(x, l, con, reg);
      for (int c = 0; c < k; ++c) {
        CHECK(p.model.weights(c) == doctest::Approx(cnt[static_cast<std::size_t>(c)] / n).epsilon(1e-12));
        CHECK((p.model.means.row(c) - mean[static_cast<std::size_t>(c)]).norm() < 1e-12);
        Eigen::MatrixXd want(d, d);
        const Eigen::MatrixXd& own = cov[static_cast<std::size_t>(c)];
        switch (con) {
          case CovarianceConstraint::full: want = own; break;
          case CovarianceConstraint::tied:
            want.setZero();
            for (int t = 0; t < k; ++t) want += cov[static_cast<std::size_t>(t)] * cnt[static_cast<std::size_t>(t)] / n;
            break;
          case CovarianceConstraint::diag: want = own.diagonal().asDiagonal(); break;
          case CovarianceConstraint::spherical:
            want = Eigen::MatrixXd::Identity(d, d) * own.diagonal().mean();
            break;
        }
        want.diagonal().array() += reg;
        const Eigen::MatrixXd got = p.model.component_covariance(c);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
      }
      // Precisions invert the stored covariances.
      for (int c = 0; c < (con == CovarianceConstraint::tied ? 1 : k); ++c) {
        Eigen::MatrixXd prec(d, d);
        switch (con) {
          case CovarianceConstraint::full: prec = p.precisions.block(c * d, 0, d, d); break;
          case CovarianceConstraint::tied: prec = p.precisions; break;
          case CovarianceConstraint::diag: prec = p.precisions.row(c).asDiagonal(); break;
          case CovarianceConstraint::spherical: prec = Eigen::MatrixXd::Identity(d, d) * p.precisions(c, 0); break;
        }
        CHECK((p.model.component_covariance(c) * prec - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-9);
      }
    }
  }
}
