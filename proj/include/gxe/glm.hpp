#pragma once

#include "gxe/dataset.hpp"

#include <optional>
#include <vector>

namespace gxe {

/// Result of one fixed-effects regression.
struct DesignFit {
  VectorXd coefficients;
  MatrixXd coef_covariance;
  /// Mean response: X*beta + offset (Gaussian) or logistic(X*beta + offset).
  VectorXd fitted;
  /// y - fitted.
  VectorXd residuals;
  /// RSS (Gaussian) or deviance (binomial).
  double objective = 0.0;
  double loglik = 0.0;
  /// sigma^2 = RSS/(n-m) for Gaussian, 1 for binomial.
  double scale = 1.0;
  Index rank = 0;
  int iterations = 1;
  bool converged = true;
  /// Objective after every IRLS iteration (a single entry for least squares).
  std::vector<double> objective_history;

  VectorXd standard_errors() const { return coef_covariance.diagonal().cwiseSqrt(); }
};

/// Least squares of (y - offset) on X by Householder QR. Throws
/// RankDeficientError naming the first dependent column, UsageError when
/// n <= m.
DesignFit fit_linear(const MatrixXd& X, const VectorXd& y,
                     const std::optional<VectorXd>& offset = std::nullopt);

struct LogisticOptions {
  int max_iterations = 50;
  /// Convergence when |dev_old - dev| / (|dev| + 0.1) falls below this.
  double tolerance = 1e-8;
  /// Coefficients beyond this magnitude are treated as separation.
  double separation_bound = 1e4;
};

/// Logistic regression with a fixed offset by IRLS with step halving, so the
/// deviance never increases between iterations. `start` seeds the
/// coefficients (zeros otherwise). Throws SeparationError when the
/// coefficients diverge.
DesignFit fit_logistic(const MatrixXd& X, const VectorXd& y,
                       const std::optional<VectorXd>& offset = std::nullopt,
                       const std::optional<VectorXd>& start = std::nullopt,
                       const LogisticOptions& options = {});

/// Gaussian maximum log-likelihood at the least-squares fit.
double gaussian_loglik(double rss, Index n);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

InformationCriteria information_criteria(double loglik, int true_param_count, double n);

/// Main coefficients (one per intercept, 3 two-way or 7 three-way score
/// terms) + (n_s - 1) for every estimated score + covariates, plus one for
/// the Gaussian scale when `include_scale`.
int true_parameter_count(const ModelStructure& structure, bool include_scale);

}  // namespace gxe
