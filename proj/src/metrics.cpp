#include "autogmm/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "autogmm/parallel.hpp"

namespace autogmm {

namespace {

double comb2(double x) { return x * (x - 1.0) / 2.0; }

std::vector<int> densify(const Labels& labels, int& count) {
  std::unordered_map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  count = static_cast<int>(ids.size());
  return out;
}

// Average ranks of the values, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

double adjusted_rand_index(const Labels& u, const Labels& v) {
  if (u.size() != v.size()) {
    throw InputError("label vectors differ in length (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  }
  if (u.size() < 2) throw InputError("adjusted Rand index needs at least 2 samples");
  int ru = 0, rv = 0;
  const std::vector<int> du = densify(u, ru);
  const std::vector<int> dv = densify(v, rv);

  std::vector<double> table(static_cast<std::size_t>(ru) * static_cast<std::size_t>(rv), 0.0);
  std::vector<double> row(static_cast<std::size_t>(ru), 0.0), col(static_cast<std::size_t>(rv), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    table[static_cast<std::size_t>(du[i]) * static_cast<std::size_t>(rv) + static_cast<std::size_t>(dv[i])] += 1.0;
    row[static_cast<std::size_t>(du[i])] += 1.0;
    col[static_cast<std::size_t>(dv[i])] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (double c : table) index += comb2(c);
  for (double r : row) sum_rows += comb2(r);
  for (double c : col) sum_cols += comb2(c);
  const double expected = sum_rows * sum_cols / comb2(static_cast<double>(u.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMode mode) {
  if (a.size() != b.size()) throw InputError("paired samples differ in length");
  if (a.size() < 2) throw InputError("signed-rank test needs at least 2 pairs");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw InputError("paired samples contain non-finite values");
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DegenerateError("all paired differences are zero");

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const std::vector<double> ranks = average_ranks(magnitudes);

  WilcoxonResult out;
  out.n_used = static_cast<int>(diffs.size());
  const double n = static_cast<double>(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) out.w_plus += ranks[i];
  }
  const double total = n * (n + 1.0) / 2.0;
  out.statistic = std::min(out.w_plus, total - out.w_plus);

  if (mode == WilcoxonMode::normal) {
    double tie_term = 0.0;
    std::vector<double> sorted = magnitudes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double mean = total / 2.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    out.z = (out.statistic - mean) / std::sqrt(var);
    out.p_value = std::min(1.0, normal_two_sided(out.z));
    return out;
  }

  if (out.n_used > kWilcoxonExactMax) {
    throw InputError("exact signed-rank test supports at most " +
                     std::to_string(kWilcoxonExactMax) + " nonzero differences");
  }
  // Null distribution of 2*W+ over all sign assignments; doubled ranks are integers.
  std::vector<int> doubled(ranks.size());
  std::transform(ranks.begin(), ranks.end(), doubled.begin(),
                 [](double r) { return static_cast<int>(std::lround(2.0 * r)); });
  const int max_sum = std::accumulate(doubled.begin(), doubled.end(), 0);
  std::vector<double> counts(static_cast<std::size_t>(max_sum) + 1, 0.0);
  counts[0] = 1.0;
  int reach = 0;
  for (int r : doubled) {
    for (int s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  const int observed = static_cast<int>(std::lround(2.0 * out.w_plus));
  const double all = std::ldexp(1.0, out.n_used);
  double lo = 0.0, hi = 0.0;
  for (int s = 0; s <= max_sum; ++s) {
    if (s <= observed) lo += counts[static_cast<std::size_t>(s)];
    if (s >= observed) hi += counts[static_cast<std::size_t>(s)];
  }
  out.p_value = std::min(1.0, 2.0 * std::min(lo, hi) / all);
  return out;
}

BenchmarkReport subsample_benchmark(const DataMatrix& data, const Labels& truth,
                                    const std::vector<NamedConfig>& configs, int reps,
                                    double frac, std::uint64_t seed, WilcoxonMode mode) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (truth.size() != n) throw InputError("truth labels do not match the number of samples");
  if (!(frac > 0.0 && frac <= 1.0)) throw InputError("subsample fraction must be in (0, 1]");
  if (reps < 2) throw InputError("benchmark needs at least 2 repetitions");
  if (configs.empty()) throw InputError("benchmark needs at least one configuration");
  const auto size = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  if (size < 2) throw InputError("subsample would contain fewer than 2 rows");

  BenchmarkReport report;
  report.mode = mode;
  report.threads = resolve_threads(configs.front().config.threads);
  for (int r = 0; r < reps; ++r) {
    report.subsets.push_back(
        subset_indices(n, size, derive_seed(seed, static_cast<std::uint64_t>(r), 0x62656e6368ULL)));
  }

  for (int r = 0; r < reps; ++r) {
    const auto& rows = report.subsets[static_cast<std::size_t>(r)];
    const DataMatrix sub = select_rows(data, rows);
    Labels sub_truth(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) sub_truth[i] = truth[rows[i]];
    for (const auto& named : configs) {
      BenchmarkRecord rec;
      rec.rep = r;
      rec.method = named.name;
      const auto start = std::chrono::steady_clock::now();
      try {
        const SearchResult found = autogmm_search(sub, named.config);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rec.k = found.best.k;
        rec.ari = adjusted_rand_index(found.best.fit->labels, sub_truth);
      } catch (const Error& e) {
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rec.failed = true;
        rec.failure = e.what();
        rec.ari = std::numeric_limits<double>::quiet_NaN();
      }
      report.records.push_back(std::move(rec));
    }
  }

  const std::size_t m = configs.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      for (const char* metric : {"ari", "seconds"}) {
        PairwiseTest test{configs[i].name, configs[j].name, metric, std::nullopt, {}};
        std::vector<double> xa, xb;
        for (int r = 0; r < reps; ++r) {
          const auto& ra = report.records[static_cast<std::size_t>(r) * m + i];
          const auto& rb = report.records[static_cast<std::size_t>(r) * m + j];
          if (ra.failed || rb.failed) continue;
          const bool ari = std::string_view(metric) == "ari";
          xa.push_back(ari ? ra.ari : ra.seconds);
          xb.push_back(ari ? rb.ari : rb.seconds);
        }
        if (xa.size() < 2) {
          test.note = "fewer than 2 subsamples where both methods succeeded";
        } else {
          try {
            test.result = wilcoxon_signed_rank(xa, xb, mode);
          } catch (const Error& e) {
            test.note = e.what();
          }
        }
        report.tests.push_back(std::move(test));
      }
    }
  }
  return report;
}

}  // namespace autogmm
