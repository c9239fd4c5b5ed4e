#ifndef AUTOGMM_GMM_HPP
#define AUTOGMM_GMM_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autogmm/common.hpp"

namespace autogmm {

// Declaration order is the complexity order used for tie-breaking.
enum class CovarianceConstraint { spherical, diag, tied, full };

inline constexpr std::array<CovarianceConstraint, 4> kAllConstraints = {
    CovarianceConstraint::spherical, CovarianceConstraint::diag, CovarianceConstraint::tied,
    CovarianceConstraint::full};

std::string_view to_string(CovarianceConstraint c);
CovarianceConstraint parse_constraint(std::string_view name);

enum class Criterion { bic, aic };

std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view name);

/// Mixture of k Gaussians in d dimensions.
///
/// Covariance storage depends on the constraint:
///   full      (k*d) x d, component j occupies rows [j*d, (j+1)*d)
///   tied      d x d
///   diag      k x d, one variance vector per row
///   spherical k x 1
/// Stored covariances already include reg_covar on their diagonal.
struct GmmModel {
  CovarianceConstraint constraint = CovarianceConstraint::full;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;  // k x d
  Eigen::MatrixXd covariances;
  double reg_covar = 0.0;

  int k() const { return static_cast<int>(means.rows()); }
  int d() const { return static_cast<int>(means.cols()); }

  /// Dense d x d covariance of component j.
  Eigen::MatrixXd component_covariance(int j) const;

  /// Checks storage shape and the weight simplex; throws InputError.
  void validate() const;
};

struct EmSettings {
  int max_iter = 100;
  // On the mean per-sample log-likelihood. Looser values stop EM mid-way
  // through slow rotations such as a split of elongated clusters.
  double tol = 1e-5;
  double reg_covar = 0.0;

  void validate() const;
};

struct FitResult {
  GmmModel model;
  Labels labels;
  double log_likelihood = 0.0;  // total, natural log
  int n_iter = 0;
  bool converged = false;
  // Total log-likelihood after every E-step, ending with the returned model.
  std::vector<double> log_likelihood_trace;
};

/// Sum over samples of ln f(x_i), evaluated with log-sum-exp.
double log_likelihood(const DataMatrix& data, const GmmModel& model);

/// n x k matrix of ln(w_j) + ln N(x_i; mu_j, Sigma_j).
Eigen::MatrixXd weighted_log_prob(const DataMatrix& data, const GmmModel& model);

/// Normalized posterior responsibilities, n x k.
Eigen::MatrixXd responsibilities(const DataMatrix& data, const GmmModel& model);

/// Hard assignment by maximum responsibility; ties go to the lowest index.
Labels predict_labels(const DataMatrix& data, const GmmModel& model);

/// Maximum-likelihood parameters given (soft) responsibilities, with reg_covar
/// added to every covariance diagonal.
GmmModel estimate_from_responsibilities(const DataMatrix& data, const Eigen::MatrixXd& resp,
                                        CovarianceConstraint constraint, double reg_covar);

/// Runs EM from `init`. k = 1 is solved in closed form and needs no init; for
/// k > 1 an init is required. Throws EmError when a covariance stops being
/// positive definite or the likelihood becomes non-finite.
FitResult em_fit(const DataMatrix& data, int k, CovarianceConstraint constraint,
                 const EmSettings& settings, const std::optional<GmmModel>& init = std::nullopt);

/// Free parameters: (k-1) mixing weights, k*d means, plus the covariance entries.
long param_count(int k, int d, CovarianceConstraint constraint);

/// Larger-is-better information criterion:
///   bic = 2 ln L - p ln n,  aic = 2 ln L - 2p.
double criterion_value(double log_likelihood, long params, long n, Criterion criterion);
double criterion_value(const FitResult& fit, long n, Criterion criterion);

}  // namespace autogmm

#endif  // AUTOGMM_GMM_HPP
