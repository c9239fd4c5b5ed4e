#include "autogmm/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace autogmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Upper-triangular U with Sigma^{-1} = U U^T, so (x - mu)^T Sigma^{-1} (x - mu)
// = ||(x - mu)^T U||^2. Also returns sum(log diag U) = -0.5 log|Sigma|.
struct PrecisionFactor {
  Eigen::MatrixXd upper;
  double log_det_half = 0.0;
};

PrecisionFactor factor_precision(const Eigen::MatrixXd& cov) {
  const Eigen::Index d = cov.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("covariance is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  double log_diag = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double v = lower(i, i);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NumericError("covariance is not positive definite");
    }
    log_diag += std::log(v);
  }
  Eigen::MatrixXd inv_lower =
      lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  PrecisionFactor f;
  f.upper = inv_lower.transpose();
  f.log_det_half = -log_diag;
  if (!f.upper.allFinite()) throw NumericError("covariance is not positive definite");
  return f;
}

void require_positive(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw NumericError("variance is not positive");
  }
}

void require_dims(const DataMatrix& data, const GmmModel& model) {
  if (data.cols() != model.d()) {
    throw InputError("data has " + std::to_string(data.cols()) + " columns, model expects " +
                     std::to_string(model.d()));
  }
}

Eigen::VectorXd log_sum_exp_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    if (!std::isfinite(mx)) {
      out(i) = mx;
      continue;
    }
    out(i) = mx + std::log((m.row(i).array() - mx).exp().sum());
  }
  return out;
}

struct EStep {
  double total_log_likelihood = 0.0;
  Eigen::MatrixXd log_resp;
};

EStep e_step(const DataMatrix& data, const GmmModel& model) {
  Eigen::MatrixXd wlp = weighted_log_prob(data, model);
  const Eigen::VectorXd norm = log_sum_exp_rows(wlp);
  EStep out;
  out.total_log_likelihood = norm.sum();
  wlp.colwise() -= norm;
  out.log_resp = std::move(wlp);
  return out;
}

Labels argmax_rows(const Eigen::MatrixXd& m) {
  Labels labels(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace

std::string_view to_string(CovarianceConstraint c) {
  switch (c) {
    case CovarianceConstraint::spherical: return "spherical";
    case CovarianceConstraint::diag: return "diag";
    case CovarianceConstraint::tied: return "tied";
    case CovarianceConstraint::full: return "full";
  }
  return "?";
}

CovarianceConstraint parse_constraint(std::string_view name) {
  for (auto c : kAllConstraints) {
    if (to_string(c) == name) return c;
  }
  throw InputError("unknown covariance constraint '" + std::string(name) + "'");
}

std::string_view to_string(Criterion c) { return c == Criterion::bic ? "bic" : "aic"; }

Criterion parse_criterion(std::string_view name) {
  if (name == "bic") return Criterion::bic;
  if (name == "aic") return Criterion::aic;
  throw InputError("unknown criterion '" + std::string(name) + "'");
}

Eigen::MatrixXd GmmModel::component_covariance(int j) const {
  const int dim = d();
  switch (constraint) {
    case CovarianceConstraint::full: return covariances.block(j * dim, 0, dim, dim);
    case CovarianceConstraint::tied: return covariances;
    case CovarianceConstraint::diag: return covariances.row(j).transpose().asDiagonal();
    case CovarianceConstraint::spherical:
      return Eigen::MatrixXd::Identity(dim, dim) * covariances(j, 0);
  }
  return {};
}

void GmmModel::validate() const {
  const int kk = k();
  const int dim = d();
  if (kk < 1 || dim < 1) throw InputError("model needs k >= 1 and d >= 1");
  if (weights.size() != kk) throw InputError("weights length does not match k");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw InputError("weights must be a probability vector");
  }
  Eigen::Index rows = 0, cols = 0;
  switch (constraint) {
    case CovarianceConstraint::full: rows = kk * dim; cols = dim; break;
    case CovarianceConstraint::tied: rows = dim; cols = dim; break;
    case CovarianceConstraint::diag: rows = kk; cols = dim; break;
    case CovarianceConstraint::spherical: rows = kk; cols = 1; break;
  }
  if (covariances.rows() != rows || covariances.cols() != cols) {
    throw InputError("covariance storage does not match the " + std::string(to_string(constraint)) +
                     " constraint");
  }
  if (reg_covar < 0.0) throw InputError("reg_covar must be nonnegative");
}

void EmSettings::validate() const {
  if (max_iter < 1) throw InputError("max_iter must be >= 1");
  if (!(tol > 0.0)) throw InputError("tol must be > 0");
  if (!(reg_covar >= 0.0)) throw InputError("reg_covar must be >= 0");
}

Eigen::MatrixXd weighted_log_prob(const DataMatrix& data, const GmmModel& model) {
  require_dims(data, model);
  const Eigen::Index n = data.rows();
  const int kk = model.k();
  const int dim = model.d();
  Eigen::MatrixXd out(n, kk);
  const double base = -0.5 * dim * kLog2Pi;

  switch (model.constraint) {
    case CovarianceConstraint::full:
    case CovarianceConstraint::tied: {
      PrecisionFactor shared;
      if (model.constraint == CovarianceConstraint::tied) {
        shared = factor_precision(model.covariances);
      }
      for (int j = 0; j < kk; ++j) {
        const PrecisionFactor f = model.constraint == CovarianceConstraint::full
                                      ? factor_precision(model.component_covariance(j))
                                      : shared;
        const Eigen::RowVectorXd shift = model.means.row(j) * f.upper;
        const Eigen::MatrixXd y = (data * f.upper).rowwise() - shift;
        out.col(j) = (-0.5 * y.rowwise().squaredNorm()).array() + base + f.log_det_half;
      }
      break;
    }
    case CovarianceConstraint::diag: {
      for (int j = 0; j < kk; ++j) {
        const Eigen::RowVectorXd var = model.covariances.row(j);
        for (Eigen::Index c = 0; c < dim; ++c) require_positive(var(c));
        const Eigen::RowVectorXd prec = var.cwiseInverse();
        const double log_det_half = -0.5 * var.array().log().sum();
        const Eigen::MatrixXd diff = data.rowwise() - model.means.row(j);
        out.col(j) = (-0.5 * (diff.array().square().rowwise() * prec.array()).rowwise().sum())
                         .matrix()
                         .array() +
                     base + log_det_half;
      }
      break;
    }
    case CovarianceConstraint::spherical: {
      for (int j = 0; j < kk; ++j) {
        const double var = model.covariances(j, 0);
        require_positive(var);
        const Eigen::VectorXd sq = (data.rowwise() - model.means.row(j)).rowwise().squaredNorm();
        out.col(j) = (-0.5 / var * sq).array() + base - 0.5 * dim * std::log(var);
      }
      break;
    }
  }
  for (int j = 0; j < kk; ++j) {
    out.col(j).array() += std::log(model.weights(j));
  }
  return out;
}

double log_likelihood(const DataMatrix& data, const GmmModel& model) {
  return log_sum_exp_rows(weighted_log_prob(data, model)).sum();
}

Eigen::MatrixXd responsibilities(const DataMatrix& data, const GmmModel& model) {
  return e_step(data, model).log_resp.array().exp();
}

Labels predict_labels(const DataMatrix& data, const GmmModel& model) {
  // The row normalizer is shared by every component, so the argmax of the
  // weighted log-density is the argmax of the responsibility.
  return argmax_rows(weighted_log_prob(data, model));
}

GmmModel estimate_from_responsibilities(const DataMatrix& data, const Eigen::MatrixXd& resp,
                                        CovarianceConstraint constraint, double reg_covar) {
  const Eigen::Index n = data.rows();
  const Eigen::Index dim = data.cols();
  const Eigen::Index kk = resp.cols();
  if (resp.rows() != n) throw InputError("responsibility rows do not match data");

  // Same guard against empty components as scikit-learn: 10 * machine epsilon.
  const Eigen::VectorXd nk =
      resp.colwise().sum().transpose().array() + 10.0 * std::numeric_limits<double>::epsilon();

  GmmModel model;
  model.constraint = constraint;
  model.reg_covar = reg_covar;
  model.weights = nk / nk.sum();
  model.means = (resp.transpose() * data).array().colwise() / nk.array();

  switch (constraint) {
    case CovarianceConstraint::full: {
      model.covariances.resize(kk * dim, dim);
      for (Eigen::Index j = 0; j < kk; ++j) {
        const Eigen::MatrixXd diff = data.rowwise() - model.means.row(j);
        Eigen::MatrixXd cov =
            diff.transpose() * (diff.array().colwise() * resp.col(j).array()).matrix() / nk(j);
        cov.diagonal().array() += reg_covar;
        model.covariances.block(j * dim, 0, dim, dim) = cov;
      }
      break;
    }
    case CovarianceConstraint::tied: {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
      for (Eigen::Index j = 0; j < kk; ++j) {
        const Eigen::MatrixXd diff = data.rowwise() - model.means.row(j);
        cov += diff.transpose() * (diff.array().colwise() * resp.col(j).array()).matrix();
      }
      cov /= nk.sum();
      cov.diagonal().array() += reg_covar;
      model.covariances = cov;
      break;
    }
    case CovarianceConstraint::diag:
    case CovarianceConstraint::spherical: {
      Eigen::MatrixXd var(kk, dim);
      for (Eigen::Index j = 0; j < kk; ++j) {
        const Eigen::MatrixXd diff = data.rowwise() - model.means.row(j);
        var.row(j) = (resp.col(j).transpose() * diff.array().square().matrix()) / nk(j);
      }
      if (constraint == CovarianceConstraint::diag) {
        model.covariances = var.array() + reg_covar;
      } else {
        model.covariances = var.rowwise().mean().array() + reg_covar;
      }
      break;
    }
  }
  return model;
}

FitResult em_fit(const DataMatrix& data, int k, CovarianceConstraint constraint,
                 const EmSettings& settings, const std::optional<GmmModel>& init) {
  settings.validate();
  const Eigen::Index n = data.rows();
  if (k < 1) throw InputError("k must be >= 1");
  if (n < k) {
    throw InputError("need at least k samples (n=" + std::to_string(n) +
                     ", k=" + std::to_string(k) + ")");
  }
  if (!data.allFinite()) throw InputError("data contains non-finite values");

  FitResult result;
  if (k == 1) {
    result.model = estimate_from_responsibilities(data, Eigen::MatrixXd::Ones(n, 1), constraint,
                                                  settings.reg_covar);
    result.model.weights(0) = 1.0;
    try {
      result.log_likelihood = log_likelihood(data, result.model);
    } catch (const NumericError& e) {
      throw EmError(std::string("EM failed: ") + e.what());
    }
    if (!std::isfinite(result.log_likelihood)) throw EmError("EM failed: non-finite likelihood");
    result.log_likelihood_trace = {result.log_likelihood};
    result.labels.assign(static_cast<std::size_t>(n), 0);
    result.n_iter = 1;
    result.converged = true;
    return result;
  }

  if (!init) throw InputError("EM with k > 1 needs initial parameters");
  init->validate();
  if (init->k() != k || init->d() != data.cols() || init->constraint != constraint) {
    throw InputError("initial parameters do not match (k, d, constraint)");
  }

  GmmModel model = *init;
  double lower_bound = -std::numeric_limits<double>::infinity();
  try {
    for (int iter = 1; iter <= settings.max_iter; ++iter) {
      const double prev = lower_bound;
      EStep e = e_step(data, model);
      if (!std::isfinite(e.total_log_likelihood)) {
        throw EmError("EM failed: non-finite likelihood");
      }
      result.log_likelihood_trace.push_back(e.total_log_likelihood);
      model = estimate_from_responsibilities(data, e.log_resp.array().exp().matrix(), constraint,
                                             settings.reg_covar);
      lower_bound = e.total_log_likelihood / static_cast<double>(n);
      result.n_iter = iter;
      if (std::abs(lower_bound - prev) < settings.tol) {
        result.converged = true;
        break;
      }
    }
    EStep last = e_step(data, model);
    if (!std::isfinite(last.total_log_likelihood)) {
      throw EmError("EM failed: non-finite likelihood");
    }
    result.log_likelihood = last.total_log_likelihood;
    result.log_likelihood_trace.push_back(last.total_log_likelihood);
    result.labels = argmax_rows(last.log_resp);
  } catch (const EmError&) {
    throw;
  } catch (const NumericError& e) {
    throw EmError(std::string("EM failed: ") + e.what());
  }
  result.model = std::move(model);
  return result;
}

long param_count(int k, int d, CovarianceConstraint constraint) {
  if (k < 1 || d < 1) throw InputError("param_count needs k >= 1 and d >= 1");
  const long kl = k;
  const long dl = d;
  long cov = 0;
  switch (constraint) {
    case CovarianceConstraint::full: cov = kl * dl * (dl + 1) / 2; break;
    case CovarianceConstraint::tied: cov = dl * (dl + 1) / 2; break;
    case CovarianceConstraint::diag: cov = kl * dl; break;
    case CovarianceConstraint::spherical: cov = kl; break;
  }
  return (kl - 1) + kl * dl + cov;
}

double criterion_value(double log_likelihood, long params, long n, Criterion criterion) {
  if (n < 1) throw InputError("criterion needs n >= 1");
  if (!std::isfinite(log_likelihood)) throw NumericError("log-likelihood is not finite");
  const double p = static_cast<double>(params);
  if (criterion == Criterion::bic) {
    return 2.0 * log_likelihood - p * std::log(static_cast<double>(n));
  }
  return 2.0 * log_likelihood - 2.0 * p;
}

double criterion_value(const FitResult& fit, long n, Criterion criterion) {
  return criterion_value(fit.log_likelihood, param_count(fit.model.k(), fit.model.d(),
                                                         fit.model.constraint),
                         n, criterion);
}

}  // namespace autogmm
