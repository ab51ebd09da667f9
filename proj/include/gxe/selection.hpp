#pragma once

#include "gxe/alternating.hpp"
#include "gxe/dataset.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gxe {

// -------------------------------------------------------------------------
// Cross-validation
// -------------------------------------------------------------------------

/// Leave-one-subject-out, or K folds of whole subjects.
struct CvScheme {
  enum class Kind { LeaveOneOut, KFold };
  Kind kind = Kind::LeaveOneOut;
  int folds = 0;

  static CvScheme loo() { return {Kind::LeaveOneOut, 0}; }
  static CvScheme kfold(int k) { return {Kind::KFold, k}; }
  /// "loo" or a positive integer.
  static CvScheme parse(const std::string& text);
  std::string label() const;
};

/// Fold id of every subject. A pure function of its arguments; subjects
/// are shuffled with `seed` before round-robin assignment for K folds.
std::vector<int> assign_folds(int subject_count, const CvScheme& scheme, std::uint64_t seed);

/// 1 - sum (y - yhat)^2 / sum (y - mean(y))^2 over every row, with mean(y)
/// the grand mean of all outcomes.
double cv_r2(const VectorXd& y, const VectorXd& predictions);

/// Area under the ROC curve of scores against 0/1 labels (ties count 1/2),
/// the trapezoidal AUC.
double auc(const VectorXd& labels, const VectorXd& scores);

/// Fits on `train` and predicts the mean response of `test`.
using FitPredict = std::function<VectorXd(const Dataset& train, const Dataset& test)>;

struct FoldSummary {
  int fold = 0;
  bool ok = false;
  std::string error;
  bool converged = true;
  int iterations = 0;
  double objective = 0.0;
};

struct CvResult {
  std::vector<int> fold_of_subject;
  std::vector<int> fold_of_row;
  /// Out-of-fold mean predictions (NaN for rows of failed folds).
  VectorXd predictions;
  double r2 = 0.0;
  std::optional<double> auc;
  std::vector<FoldSummary> folds;
  /// Some fold failed; r2 covers the remaining rows only.
  bool partial = false;
};

/// Generic cross-validation: folds of whole subjects, each predicted by a
/// model trained without any of that fold's rows.
CvResult cross_validate(const Dataset& data, const CvScheme& scheme, std::uint64_t seed,
                        const FitPredict& learner, int threads = 1);

/// Cross-validates an alternating-optimization model. Folds are fixed before
/// any fitting; each fold starts from the full-data converged weights.
CvResult cross_validate(const ModelStructure& structure, const Dataset& data,
                        const CvScheme& scheme, std::uint64_t seed,
                        const FitOptions& options = {}, int threads = 1);

// -------------------------------------------------------------------------
// Stepwise search
// -------------------------------------------------------------------------

enum class Direction { Forward, Backward, Bidirectional };
enum class Criterion { Aic, Bic, CvR2, CvAuc };

std::string to_string(Direction direction);
std::string to_string(Criterion criterion);
Direction parse_direction(const std::string& text);
Criterion parse_criterion(const std::string& text);
/// AIC and BIC are minimized, the cross-validated criteria maximized.
bool lower_is_better(Criterion criterion);

struct Candidates {
  std::map<ScoreRole, std::vector<ScoreElement>> elements;
  std::vector<std::string> covariates;

  bool empty() const;
};

struct StepwiseOptions {
  Direction direction = Direction::Forward;
  Criterion criterion = Criterion::Bic;
  CvScheme cv = CvScheme::loo();
  std::uint64_t seed = 20170831;
  FitOptions fit;
  int threads = 1;
  /// Prompts for each move on `out` and reads the choice from `in`.
  bool interactive = false;
  std::istream* in = nullptr;
  std::ostream* out = nullptr;
};

struct StepRecord {
  enum class Action { Add, Drop };
  Action action = Action::Add;
  /// Score name, or "covariates".
  std::string target;
  std::string element;
  double criterion_before = 0.0;
  double criterion_after = 0.0;
};

struct StepwiseTrace {
  std::vector<StepRecord> steps;
  ModelStructure final_structure;
  double final_criterion = 0.0;
  /// Recoding suggestions for elements that entered with negative weights.
  std::vector<std::string> advisories;
};

/// Greedy search: each round refits every single add (and/or drop) and
/// accepts the best strictly improving move, until none improves. Ties go
/// to the earlier candidate. Throws NumericalError when no candidate of the
/// first round can be fitted.
StepwiseTrace stepwise_search(const ModelStructure& base, const Dataset& data,
                              const Candidates& candidates, const StepwiseOptions& options);

// -------------------------------------------------------------------------
// Outliers
// -------------------------------------------------------------------------

struct OutlierRecord {
  Index row = 0;
  int subject = 0;
  double outcome = 0.0;
  double prediction = 0.0;
  double residual = 0.0;
  double z = 0.0;
};

struct OutlierReport {
  double threshold = 2.8;
  /// Sample SD of the LOOCV residuals.
  double residual_sd = 0.0;
  /// Standardized LOOCV residual of every row.
  VectorXd z;
  std::vector<OutlierRecord> flagged;
  CvResult cv;
};

/// Flags rows whose leave-one-subject-out residual (Pearson residual for the
/// binomial family), divided by the sample SD of all such residuals,
/// exceeds `threshold` in magnitude. Throws NumericalError when the
/// residuals have zero spread.
OutlierReport detect_outliers(const ModelStructure& structure, const Dataset& data,
                              double threshold = 2.8, const FitOptions& options = {},
                              int threads = 1);

/// Standardizes residuals by their sample SD and flags |z| > threshold.
std::vector<Index> flag_standardized(const VectorXd& residuals, double threshold,
                                     VectorXd* z_out = nullptr, double* sd_out = nullptr);

}  // namespace gxe
