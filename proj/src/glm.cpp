#include "gxe/glm.hpp"

#include "gxe/errors.hpp"

#include <cmath>
#include <numbers>

namespace gxe {

namespace {

constexpr double kRankTolerance = 1e-10;

struct QrSolve {
  Eigen::HouseholderQR<MatrixXd> qr;
  VectorXd beta;
  MatrixXd r_inverse;
};

// Unpivoted QR so that a tiny diagonal entry of R identifies the first column
// that depends on the columns before it.
QrSolve solve_least_squares(const MatrixXd& X, const VectorXd& target) {
  const Index n = X.rows();
  const Index m = X.cols();
  if (n <= m) {
    throw UsageError("need more rows than design columns (" + std::to_string(n) + " <= " +
                     std::to_string(m) + ")");
  }
  QrSolve out{Eigen::HouseholderQR<MatrixXd>(X), {}, {}};
  const MatrixXd& packed = out.qr.matrixQR();
  const double max_diag = packed.diagonal().cwiseAbs().maxCoeff();
  for (Index j = 0; j < m; ++j) {
    if (!(std::abs(packed(j, j)) > kRankTolerance * max_diag)) {
      throw RankDeficientError("design column " + std::to_string(j) +
                                   " is linearly dependent on the preceding columns",
                               static_cast<long>(j));
    }
  }
  const auto R = packed.topLeftCorner(m, m).triangularView<Eigen::Upper>();
  VectorXd qty = out.qr.householderQ().adjoint() * target;
  out.beta = R.solve(qty.head(m));
  out.r_inverse = R.solve(MatrixXd::Identity(m, m));
  return out;
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double binomial_deviance(const VectorXd& y, const VectorXd& eta) {
  double dev = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    dev += 2.0 * (y(i) > 0.5 ? softplus(-eta(i)) : softplus(eta(i)));
  }
  return dev;
}

}  // namespace

DesignFit fit_linear(const MatrixXd& X, const VectorXd& y, const std::optional<VectorXd>& offset) {
  if (y.size() != X.rows()) throw UsageError("outcome length does not match design rows");
  VectorXd target = offset ? VectorXd(y - *offset) : y;
  QrSolve solved = solve_least_squares(X, target);

  DesignFit fit;
  const Index n = X.rows();
  const Index m = X.cols();
  fit.coefficients = std::move(solved.beta);
  fit.fitted = X * fit.coefficients;
  if (offset) fit.fitted += *offset;
  fit.residuals = y - fit.fitted;
  fit.objective = fit.residuals.squaredNorm();
  fit.scale = fit.objective / static_cast<double>(n - m);
  fit.coef_covariance = fit.scale * (solved.r_inverse * solved.r_inverse.transpose());
  fit.loglik = gaussian_loglik(fit.objective, n);
  fit.rank = m;
  fit.objective_history = {fit.objective};
  return fit;
}

DesignFit fit_logistic(const MatrixXd& X, const VectorXd& y, const std::optional<VectorXd>& offset,
                       const std::optional<VectorXd>& start, const LogisticOptions& options) {
  const Index n = X.rows();
  const Index m = X.cols();
  if (y.size() != n) throw UsageError("outcome length does not match design rows");
  for (Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw UsageError("logistic outcome must be 0/1");
  }
  const VectorXd off = offset ? *offset : VectorXd::Zero(n);

  VectorXd beta = start ? *start : VectorXd::Zero(m);
  VectorXd eta = X * beta + off;
  double deviance = binomial_deviance(y, eta);

  DesignFit fit;
  fit.converged = false;
  int iteration = 0;
  MatrixXd r_inverse;
  while (iteration < options.max_iterations) {
    ++iteration;
    VectorXd sqrt_w(n);
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) {
      const double mu = logistic(eta(i));
      const double w = std::max(mu * (1.0 - mu), 1e-300);
      sqrt_w(i) = std::sqrt(w);
      z(i) = (eta(i) - off(i)) + (y(i) - mu) / w;
    }
    QrSolve solved = solve_least_squares(sqrt_w.asDiagonal() * X, sqrt_w.cwiseProduct(z));
    VectorXd candidate = std::move(solved.beta);

    VectorXd eta_new = X * candidate + off;
    double dev_new = binomial_deviance(y, eta_new);
    // Near the optimum the deviance is flat to rounding; a full step that
    // changes it only at that level is still taken.
    const double noise = 1e-12 * (std::abs(deviance) + 1.0);
    bool accept = dev_new <= deviance + noise;
    for (int halving = 0; halving < 40 && !accept; ++halving) {
      candidate = 0.5 * (beta + candidate);
      eta_new = X * candidate + off;
      dev_new = binomial_deviance(y, eta_new);
      accept = dev_new <= deviance + noise;
    }
    if (!accept) {
      // No descent direction left: the current point is optimal to rounding.
      fit.converged = true;
      fit.objective_history.push_back(deviance);
      break;
    }

    const double change = std::abs(deviance - dev_new) / (std::abs(dev_new) + 0.1);
    beta = std::move(candidate);
    eta = std::move(eta_new);
    deviance = dev_new;
    fit.objective_history.push_back(deviance);

    if (beta.size() > 0 && beta.cwiseAbs().maxCoeff() > options.separation_bound) {
      throw SeparationError("logistic coefficients diverge (|beta| > " +
                            std::to_string(options.separation_bound) +
                            "): the outcome is separated by the design");
    }
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (deviance < 1e-6) {
    throw SeparationError("logistic fit drives the deviance to zero: "
                          "the outcome is separated by the design");
  }

  // Covariance at the final coefficients.
  VectorXd sqrt_w(n);
  fit.fitted.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = logistic(eta(i));
    fit.fitted(i) = mu;
    sqrt_w(i) = std::sqrt(std::max(mu * (1.0 - mu), 1e-300));
  }
  QrSolve at_final = solve_least_squares(sqrt_w.asDiagonal() * X, VectorXd::Zero(n));
  fit.coef_covariance = at_final.r_inverse * at_final.r_inverse.transpose();

  fit.coefficients = std::move(beta);
  fit.residuals = y - fit.fitted;
  fit.objective = deviance;
  fit.loglik = -0.5 * deviance;
  fit.scale = 1.0;
  fit.rank = m;
  fit.iterations = iteration;
  return fit;
}

double gaussian_loglik(double rss, Index n) {
  const double nn = static_cast<double>(n);
  if (rss <= 0.0) return std::numeric_limits<double>::infinity();
  return -0.5 * nn * (std::log(2.0 * std::numbers::pi) + std::log(rss / nn) + 1.0);
}

InformationCriteria information_criteria(double loglik, int true_param_count, double n) {
  const double k = static_cast<double>(true_param_count);
  return {-2.0 * loglik + 2.0 * k, -2.0 * loglik + std::log(n) * k};
}

int true_parameter_count(const ModelStructure& structure, bool include_scale) {
  const int intercepts = structure.intercepts.empty()
                             ? 1
                             : static_cast<int>(structure.intercepts.size());
  int count = intercepts + (structure.kind == ModelKind::TwoWay ? 3 : 7);
  for (ScoreRole role : structure.roles()) {
    const ScoreSpec& s = structure.score(role);
    if (!s.fixed()) count += static_cast<int>(s.size()) - 1;
  }
  count += static_cast<int>(structure.covariates.size());
  if (include_scale && structure.family == Family::Gaussian) count += 1;
  return count;
}

}  // namespace gxe
