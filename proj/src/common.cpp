#include "autogmm/common.hpp"

#include <algorithm>

namespace autogmm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t task) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ cell);
  return splitmix64(h ^ (task * 0xd6e8feb86659fd93ULL));
}

DataMatrix select_rows(const DataMatrix& data, const std::vector<std::size_t>& rows) {
  DataMatrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

int label_count(const Labels& labels) {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace autogmm
