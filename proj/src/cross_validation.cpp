#include "gxe/selection.hpp"

#include "gxe/errors.hpp"
#include "gxe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gxe {

namespace {

struct FoldOutput {
  VectorXd predictions;
  bool converged = true;
  int iterations = 0;
  double objective = 0.0;
};

using FoldLearner = std::function<FoldOutput(const Dataset&, const Dataset&)>;

CvResult run_folds(const Dataset& data, const CvScheme& scheme, std::uint64_t seed,
                   const FoldLearner& learner, int threads) {
  if (data.subject_count() < 2) throw UsageError("cross-validation needs at least 2 subjects");
  CvResult result;
  result.fold_of_subject = assign_folds(data.subject_count(), scheme, seed);
  const auto& subjects = data.subjects();
  result.fold_of_row.resize(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    result.fold_of_row[i] = result.fold_of_subject[static_cast<std::size_t>(subjects[i])];
  }
  const int fold_count =
      *std::max_element(result.fold_of_subject.begin(), result.fold_of_subject.end()) + 1;

  result.predictions = VectorXd::Constant(data.rows(), std::numeric_limits<double>::quiet_NaN());
  result.folds.resize(static_cast<std::size_t>(fold_count));

  parallel_for(result.folds.size(), threads, [&](std::size_t f) {
    FoldSummary& summary = result.folds[f];
    summary.fold = static_cast<int>(f);
    std::vector<Index> train, test;
    for (Index i = 0; i < data.rows(); ++i) {
      (result.fold_of_row[static_cast<std::size_t>(i)] == summary.fold ? test : train).push_back(i);
    }
    if (test.empty()) {
      summary.ok = true;
      return;
    }
    try {
      FoldOutput out = learner(data.subset(train), data.subset(test));
      if (out.predictions.size() != static_cast<Index>(test.size())) {
        throw NumericalError("learner returned the wrong number of predictions");
      }
      for (std::size_t j = 0; j < test.size(); ++j) {
        result.predictions(test[j]) = out.predictions(static_cast<Index>(j));
      }
      summary.ok = true;
      summary.converged = out.converged;
      summary.iterations = out.iterations;
      summary.objective = out.objective;
    } catch (const Error& e) {
      summary.ok = false;
      summary.error = e.what();
    }
  });

  std::vector<Index> kept;
  for (Index i = 0; i < data.rows(); ++i) {
    if (std::isfinite(result.predictions(i))) kept.push_back(i);
  }
  result.partial = kept.size() != static_cast<std::size_t>(data.rows());
  if (kept.empty()) throw NumericalError("every cross-validation fold failed: " + result.folds[0].error);

  VectorXd y(static_cast<Index>(kept.size())), p(static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    y(static_cast<Index>(j)) = data.outcome()(kept[j]);
    p(static_cast<Index>(j)) = result.predictions(kept[j]);
  }
  result.r2 = cv_r2(y, p);
  const bool binary = (y.array() == 0.0 || y.array() == 1.0).all();
  const bool both = binary && (y.array() == 1.0).any() && (y.array() == 0.0).any();
  if (both) result.auc = auc(y, p);
  return result;
}

}  // namespace

// -------------------------------------------------------------------------
// Folds and metrics
// -------------------------------------------------------------------------

CvScheme CvScheme::parse(const std::string& text) {
  if (text == "loo" || text == "LOO") return loo();
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || used == 0 || k < 2) {
    throw UsageError("folds must be 'loo' or an integer >= 2, got '" + text + "'");
  }
  return kfold(k);
}

std::string CvScheme::label() const {
  return kind == Kind::LeaveOneOut ? "loo" : std::to_string(folds) + "-fold";
}

std::vector<int> assign_folds(int subject_count, const CvScheme& scheme, std::uint64_t seed) {
  if (subject_count < 2) throw UsageError("cross-validation needs at least 2 subjects");
  std::vector<int> fold(static_cast<std::size_t>(subject_count));
  if (scheme.kind == CvScheme::Kind::LeaveOneOut) {
    std::iota(fold.begin(), fold.end(), 0);
    return fold;
  }
  if (scheme.folds < 2 || scheme.folds > subject_count) {
    throw UsageError("number of folds must be between 2 and the number of subjects (" +
                     std::to_string(subject_count) + ")");
  }
  std::vector<int> order(fold.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates so the permutation depends only on the engine.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    fold[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(scheme.folds));
  }
  return fold;
}

double cv_r2(const VectorXd& y, const VectorXd& predictions) {
  if (y.size() != predictions.size() || y.size() < 2) {
    throw UsageError("cv_r2 needs matching vectors of at least 2 values");
  }
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst <= 0.0) throw NumericalError("outcome has zero variance; R^2 undefined");
  return 1.0 - (y - predictions).squaredNorm() / sst;
}

double auc(const VectorXd& labels, const VectorXd& scores) {
  if (labels.size() != scores.size()) throw UsageError("auc needs matching vectors");
  std::vector<Index> order(static_cast<std::size_t>(labels.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  // Mann-Whitney with mid-ranks for ties.
  double rank_sum = 0.0;
  double positives = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels(order[k]) == 1.0) {
        rank_sum += mid;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw NumericalError("AUC needs both outcome classes");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

// -------------------------------------------------------------------------
// Cross-validation drivers
// -------------------------------------------------------------------------

CvResult cross_validate(const Dataset& data, const CvScheme& scheme, std::uint64_t seed,
                        const FitPredict& learner, int threads) {
  return run_folds(data, scheme, seed,
                   [&](const Dataset& train, const Dataset& test) {
                     return FoldOutput{learner(train, test)};
                   },
                   threads);
}

CvResult cross_validate(const ModelStructure& structure, const Dataset& data,
                        const CvScheme& scheme, std::uint64_t seed, const FitOptions& options,
                        int threads) {
  structure.validate(data);
  // Folds are drawn inside run_folds from (subjects, scheme, seed) only, so
  // the full-data fit below cannot influence them.
  const LegitFit full = fit_alternating(structure, data, options);
  FitOptions fold_options = options;
  for (ScoreRole role : full.structure.roles()) {
    fold_options.start_weights[role] = full.weights(role);
  }
  return run_folds(data, scheme, seed,
                   [&](const Dataset& train, const Dataset& test) {
                     const LegitFit fit = fit_alternating(structure, train, fold_options);
                     return FoldOutput{predict(fit, test), fit.converged, fit.iterations,
                                       fit.objective()};
                   },
                   threads);
}

}  // namespace gxe
