#ifndef AUTOGMM_COMMON_HPP
#define AUTOGMM_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autogmm {

// n x d samples, one row per sample.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<int>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, shapes or files.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// Non-finite values or failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// EM diverged: covariance factorization failure or non-finite likelihood.
class EmError : public NumericError {
 public:
  using NumericError::NumericError;
};

// An initializer could not produce usable starting parameters.
class InitError : public Error {
 public:
  using Error::Error;
};

// Every cell of a model search failed.
class SearchError : public Error {
 public:
  using Error::Error;
};

// Statistical test undefined for the given input (e.g. all paired differences zero).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Child seed for a stochastic sub-task. Mixes with splitmix64 so neighbouring
/// (cell, task) pairs give unrelated streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t task);

/// Rows of `data` selected by `rows`, in the given order.
DataMatrix select_rows(const DataMatrix& data, const std::vector<std::size_t>& rows);

/// Number of distinct labels, assuming labels are 0..k-1.
int label_count(const Labels& labels);

}  // namespace autogmm

#endif  // AUTOGMM_COMMON_HPP
