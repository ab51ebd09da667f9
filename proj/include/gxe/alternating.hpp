#pragma once

#include "gxe/dataset.hpp"
#include "gxe/glm.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gxe {

// -------------------------------------------------------------------------
// Coefficient layout
// -------------------------------------------------------------------------

/// Order and meaning of the main coefficients. Design columns are the
/// intercepts, then every non-empty product of scores (singles, pairs,
/// triple; scores ordered env1, env2, genetic), then covariates. Two-way:
/// E, G, E:G. Three-way: E1, E2, G, E1:E2, E1:G, E2:G, E1:E2:G.
struct CoefficientLayout {
  std::vector<std::string> names;
  /// Scores multiplied into each coefficient's column (empty for intercepts
  /// and covariates).
  std::vector<std::vector<ScoreRole>> members;
  Index intercept_count = 0;
  Index term_count = 0;

  static CoefficientLayout of(const ModelStructure& structure);
  Index size() const { return static_cast<Index>(names.size()); }
  bool contains(Index coefficient, ScoreRole role) const;
  std::optional<Index> index_of(const std::string& name) const;
};

// -------------------------------------------------------------------------
// Fit result
// -------------------------------------------------------------------------

struct LegitFit {
  LegitFit(ModelStructure s, CoefficientLayout l)
      : structure(std::move(s)), layout(std::move(l)) {}

  /// Carries the final weights in each score.
  ModelStructure structure;
  CoefficientLayout layout;
  VectorXd coefficients;
  /// Conditional standard errors from the final sub-fits.
  VectorXd coefficient_se;
  std::map<ScoreRole, VectorXd> weight_se;
  /// Objective (RSS or deviance) after every sub-step, in order.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  /// Whether objective_trace was non-increasing within 1e-8 relative.
  bool monotone = true;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int parameter_count = 0;
  Index n_obs = 0;
  /// sigma^2 of the final main fit (1 for binomial).
  double scale = 1.0;
  /// In-sample R^2 of the mean response.
  double r2 = 0.0;
  /// Score signs flipped by canonicalize().
  std::map<ScoreRole, bool> flipped;

  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
  const VectorXd& weights(ScoreRole role) const { return structure.score(role).weights(); }
};

struct FitOptions {
  /// Convergence when every estimated score moves less than this (max-abs).
  double delta = 1e-4;
  int max_iterations = 100;
  /// Overrides the starting weights held in the structure's scores.
  std::map<ScoreRole, VectorXd> start_weights;
  /// Extra runs from sign-randomized equal-magnitude starts; the lowest
  /// objective wins.
  int restarts = 0;
  std::uint64_t seed = 20170831;
  LogisticOptions logistic;
};

// -------------------------------------------------------------------------
// Block steps
// -------------------------------------------------------------------------

/// Fits the main coefficients with every score held at its current weights.
DesignFit step_main(const ModelStructure& structure, const Dataset& data);

struct ScoreStep {
  /// Weights before L1 normalization.
  VectorXd raw_weights;
  /// Regression of y' = y - r0 on r1 * (element columns), no intercept
  /// (offset r0 for the binomial family).
  DesignFit fit;
};

/// Estimates the weights of one score with the main coefficients and the
/// other scores held fixed. Throws UnidentifiedError when r1 vanishes.
ScoreStep step_score(const ModelStructure& structure, const Dataset& data, ScoreRole target,
                     const VectorXd& coefficients);

/// Alternates main and score steps until every estimated score's weights
/// move less than options.delta, or max_iterations passes.
LegitFit fit_alternating(const ModelStructure& structure, const Dataset& data,
                         const FitOptions& options = {});

/// Flips every score whose largest-magnitude weight is negative, together
/// with each coefficient containing that score. Predictions are unchanged.
LegitFit canonicalize(const LegitFit& fit);

/// Applies an arbitrary set of score sign flips (the equivalent
/// parameterizations of a fit).
LegitFit flip_scores(const LegitFit& fit, const std::vector<ScoreRole>& roles);

/// Linear predictor of a fitted model on new data.
VectorXd linear_predictor(const LegitFit& fit, const Dataset& data);
/// Mean response: the linear predictor, or its logistic transform.
VectorXd predict(const LegitFit& fit, const Dataset& data);

}  // namespace gxe
