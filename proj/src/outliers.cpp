#include "gxe/selection.hpp"

#include "gxe/errors.hpp"

#include <cmath>

namespace gxe {

std::vector<Index> flag_standardized(const VectorXd& residuals, double threshold, VectorXd* z_out,
                                     double* sd_out) {
  if (residuals.size() < 2) throw UsageError("need at least 2 residuals to standardize");
  if (!(threshold > 0.0)) throw UsageError("outlier threshold must be positive");
  const double mean = residuals.mean();
  const double sd =
      std::sqrt((residuals.array() - mean).square().sum() / static_cast<double>(residuals.size() - 1));
  if (!(sd > 1e-12 * std::max(1.0, residuals.cwiseAbs().maxCoeff()))) {
    throw NumericalError("cross-validated residuals have zero spread; cannot standardize");
  }
  // Scaled but not centered: a residual is measured from zero.
  const VectorXd z = residuals / sd;
  std::vector<Index> flagged;
  for (Index i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) > threshold) flagged.push_back(i);
  }
  if (z_out) *z_out = z;
  if (sd_out) *sd_out = sd;
  return flagged;
}

OutlierReport detect_outliers(const ModelStructure& structure, const Dataset& data,
                              double threshold, const FitOptions& options, int threads) {
  OutlierReport report;
  report.threshold = threshold;
  report.cv = cross_validate(structure, data, CvScheme::loo(), 0, options, threads);
  if (report.cv.partial) {
    for (const auto& f : report.cv.folds) {
      if (!f.ok) {
        throw NumericalError("leave-one-out fold " + std::to_string(f.fold) +
                             " failed: " + f.error);
      }
    }
  }
  const VectorXd& y = data.outcome();
  const VectorXd& p = report.cv.predictions;
  VectorXd residuals = y - p;
  if (structure.family == Family::Binomial) {
    const Eigen::ArrayXd v = (p.array() * (1.0 - p.array())).max(1e-12);
    residuals = (residuals.array() / v.sqrt()).matrix();
  }
  const auto flagged = flag_standardized(residuals, threshold, &report.z, &report.residual_sd);
  for (Index i : flagged) {
    report.flagged.push_back({i, data.subjects()[static_cast<std::size_t>(i)], y(i), p(i),
                              residuals(i), report.z(i)});
  }
  return report;
}

}  // namespace gxe
