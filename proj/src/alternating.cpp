#include "gxe/alternating.hpp"

#include "gxe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gxe {

// -------------------------------------------------------------------------
// Coefficient layout
// -------------------------------------------------------------------------

namespace {

// Scores in design order: env1, env2, genetic.
std::vector<ScoreRole> design_order(const ModelStructure& s) {
  if (s.env2) return {ScoreRole::Env1, ScoreRole::Env2, ScoreRole::Genetic};
  return {ScoreRole::Env1, ScoreRole::Genetic};
}

// Non-empty subsets of `order`, by size then lexicographically.
std::vector<std::vector<ScoreRole>> score_terms(const std::vector<ScoreRole>& order) {
  const std::size_t k = order.size();
  std::vector<std::vector<ScoreRole>> terms;
  for (std::size_t size = 1; size <= k; ++size) {
    std::vector<bool> pick(k, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(size), true);
    do {
      std::vector<ScoreRole> term;
      for (std::size_t i = 0; i < k; ++i) {
        if (pick[i]) term.push_back(order[i]);
      }
      terms.push_back(std::move(term));
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return terms;
}

}  // namespace

CoefficientLayout CoefficientLayout::of(const ModelStructure& structure) {
  CoefficientLayout layout;
  if (structure.intercepts.empty()) {
    layout.names.push_back("(Intercept)");
    layout.members.emplace_back();
  } else {
    for (const auto& name : structure.intercepts) {
      layout.names.push_back(name);
      layout.members.emplace_back();
    }
  }
  layout.intercept_count = layout.size();
  for (auto& term : score_terms(design_order(structure))) {
    std::string name;
    for (ScoreRole role : term) {
      if (!name.empty()) name += ':';
      name += structure.score(role).name();
    }
    layout.names.push_back(std::move(name));
    layout.members.push_back(std::move(term));
  }
  layout.term_count = layout.size() - layout.intercept_count;
  for (const auto& cov : structure.covariates) {
    layout.names.push_back(cov);
    layout.members.emplace_back();
  }
  return layout;
}

bool CoefficientLayout::contains(Index coefficient, ScoreRole role) const {
  const auto& m = members[static_cast<std::size_t>(coefficient)];
  return std::find(m.begin(), m.end(), role) != m.end();
}

std::optional<Index> CoefficientLayout::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<Index>(it - names.begin());
}

// -------------------------------------------------------------------------
// Block problem: the data expanded once, re-weighted every sub-step
// -------------------------------------------------------------------------

namespace {

using WeightMap = std::map<ScoreRole, VectorXd>;

class BlockProblem {
 public:
  BlockProblem(const ModelStructure& structure, const Dataset& data,
               const LogisticOptions& logistic = {})
      : structure_(structure), layout_(CoefficientLayout::of(structure)), logistic_(logistic) {
    structure.validate(data);
    y_ = data.outcome();
    const Index n = data.rows();
    if (structure.intercepts.empty()) {
      base_ = MatrixXd::Ones(n, 1);
    } else {
      base_.resize(n, static_cast<Index>(structure.intercepts.size()));
      for (std::size_t i = 0; i < structure.intercepts.size(); ++i) {
        base_.col(static_cast<Index>(i)) = data.column(structure.intercepts[i]);
      }
    }
    covariates_.resize(n, static_cast<Index>(structure.covariates.size()));
    for (std::size_t i = 0; i < structure.covariates.size(); ++i) {
      covariates_.col(static_cast<Index>(i)) = data.column(structure.covariates[i]);
    }
    for (ScoreRole role : structure.roles()) {
      elements_.emplace(role, expand_score_columns(structure.score(role), data));
    }
  }

  const CoefficientLayout& layout() const { return layout_; }
  const VectorXd& y() const { return y_; }
  Index rows() const { return y_.size(); }
  Family family() const { return structure_.family; }

  WeightMap weights_of(const ModelStructure& s) const {
    WeightMap w;
    for (ScoreRole role : s.roles()) w.emplace(role, s.score(role).weights());
    return w;
  }

  std::map<ScoreRole, VectorXd> scores(const WeightMap& weights) const {
    std::map<ScoreRole, VectorXd> out;
    for (const auto& [role, e] : elements_) out.emplace(role, e * weights.at(role));
    return out;
  }

  // Product of the given scores, skipping `except`.
  VectorXd term_column(const std::vector<ScoreRole>& term,
                       const std::map<ScoreRole, VectorXd>& scores,
                       std::optional<ScoreRole> except = std::nullopt) const {
    VectorXd col = VectorXd::Ones(rows());
    for (ScoreRole role : term) {
      if (except && role == *except) continue;
      col.array() *= scores.at(role).array();
    }
    return col;
  }

  MatrixXd main_design(const WeightMap& weights) const {
    const auto s = scores(weights);
    MatrixXd X(rows(), layout_.size());
    X.leftCols(layout_.intercept_count) = base_;
    for (Index t = 0; t < layout_.term_count; ++t) {
      const Index c = layout_.intercept_count + t;
      X.col(c) = term_column(layout_.members[static_cast<std::size_t>(c)], s);
    }
    X.rightCols(covariates_.cols()) = covariates_;
    return X;
  }

  DesignFit fit_main(const WeightMap& weights, const std::optional<VectorXd>& start) const {
    const MatrixXd X = main_design(weights);
    try {
      if (family() == Family::Gaussian) return fit_linear(X, y_);
      return fit_logistic(X, y_, std::nullopt, start, logistic_);
    } catch (const RankDeficientError& e) {
      const auto& name = layout_.names[static_cast<std::size_t>(e.column())];
      throw RankDeficientError("main design column '" + name +
                                   "' is linearly dependent on the preceding columns"
                                   " (constant or collinear score?)",
                               e.column());
    }
  }

  // r0 collects every term of the linear predictor without `target`, r1 the
  // multiplier of `target` in the remaining terms.
  std::pair<VectorXd, VectorXd> offsets(ScoreRole target, const VectorXd& beta,
                                        const WeightMap& weights) const {
    const auto s = scores(weights);
    const Index ic = layout_.intercept_count;
    VectorXd r0 = base_ * beta.head(ic) + covariates_ * beta.tail(covariates_.cols());
    VectorXd r1 = VectorXd::Zero(rows());
    for (Index t = 0; t < layout_.term_count; ++t) {
      const Index c = ic + t;
      const auto& term = layout_.members[static_cast<std::size_t>(c)];
      if (layout_.contains(c, target)) {
        r1 += beta(c) * term_column(term, s, target);
      } else {
        r0 += beta(c) * term_column(term, s);
      }
    }
    return {std::move(r0), std::move(r1)};
  }

  ScoreStep fit_score(ScoreRole target, const VectorXd& beta, const WeightMap& weights) const {
    const ScoreSpec& spec = structure_.score(target);
    auto [r0, r1] = offsets(target, beta, weights);
    if (r1.cwiseAbs().maxCoeff() == 0.0) {
      throw UnidentifiedError("score '" + spec.name() +
                              "' is unidentified: every coefficient multiplying it is zero");
    }
    const MatrixXd R = r1.asDiagonal() * elements_.at(target);
    ScoreStep step;
    try {
      if (family() == Family::Gaussian) {
        step.fit = fit_linear(R, y_, r0);
      } else {
        step.fit = fit_logistic(R, y_, r0, weights.at(target), logistic_);
      }
    } catch (const RankDeficientError& e) {
      throw RankDeficientError("element '" +
                                   spec.elements()[static_cast<std::size_t>(e.column())].label() +
                                   "' of score '" + spec.name() +
                                   "' is linearly dependent on the preceding elements",
                               e.column());
    }
    step.raw_weights = step.fit.coefficients;
    return step;
  }

  VectorXd mean(const VectorXd& eta) const {
    if (family() == Family::Gaussian) return eta;
    return eta.unaryExpr([](double v) {
      return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
  }

 private:
  const ModelStructure& structure_;
  CoefficientLayout layout_;
  LogisticOptions logistic_;
  VectorXd y_;
  MatrixXd base_;
  MatrixXd covariates_;
  std::map<ScoreRole, MatrixXd> elements_;
};

bool non_increasing(const std::vector<double>& trace, double rel) {
  if (trace.empty()) return true;
  const double floor = 1e-14 * std::abs(trace.front());
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] + rel * std::abs(trace[i - 1]) + floor) return false;
  }
  return true;
}

LegitFit run_alternating(const ModelStructure& structure, const Dataset& data,
                         const FitOptions& options, WeightMap weights) {
  const BlockProblem problem(structure, data, options.logistic);
  const auto& layout = problem.layout();
  const auto roles = structure.roles();
  std::vector<ScoreRole> estimated;
  for (ScoreRole role : roles) {
    if (!structure.score(role).fixed()) estimated.push_back(role);
  }

  LegitFit fit(structure, layout);
  std::optional<VectorXd> beta;

  if (estimated.empty()) {
    fit.converged = true;
    fit.iterations = 1;
  }
  for (int it = 1; it <= options.max_iterations && !estimated.empty(); ++it) {
    fit.iterations = it;
    DesignFit main = problem.fit_main(weights, beta);
    beta = main.coefficients;
    fit.objective_trace.push_back(main.objective);

    double change = 0.0;
    for (ScoreRole role : estimated) {
      ScoreStep step = problem.fit_score(role, *beta, weights);
      const double norm = step.raw_weights.lpNorm<1>();
      VectorXd normalized = normalize_l1(step.raw_weights);
      change = std::max(change, (normalized - weights.at(role)).cwiseAbs().maxCoeff());
      weights[role] = std::move(normalized);
      // Absorb the norm into the coefficients so the fitted values, and the
      // recorded objective, match the sub-fit exactly.
      for (Index c = 0; c < layout.size(); ++c) {
        if (layout.contains(c, role)) (*beta)(c) *= norm;
      }
      fit.objective_trace.push_back(step.fit.objective);
    }
    if (change < options.delta) {
      fit.converged = true;
      break;
    }
  }

  DesignFit main = problem.fit_main(weights, beta);
  fit.objective_trace.push_back(main.objective);
  fit.coefficients = main.coefficients;
  fit.coefficient_se = main.standard_errors();
  fit.scale = main.scale;

  for (ScoreRole role : roles) {
    fit.structure.score(role) = structure.score(role).with_weights(weights.at(role));
    if (!structure.score(role).fixed()) {
      ScoreStep step = problem.fit_score(role, fit.coefficients, weights);
      fit.weight_se[role] = step.fit.standard_errors() / step.raw_weights.lpNorm<1>();
    }
    fit.flipped[role] = false;
  }

  fit.monotone = non_increasing(fit.objective_trace, 1e-8);
  fit.n_obs = data.rows();
  fit.loglik = structure.family == Family::Gaussian ? gaussian_loglik(main.objective, data.rows())
                                                    : main.loglik;
  fit.parameter_count = true_parameter_count(structure, true);
  const auto ic = information_criteria(fit.loglik, fit.parameter_count, data.rows());
  fit.aic = ic.aic;
  fit.bic = ic.bic;
  const VectorXd& y = problem.y();
  const double tss = (y.array() - y.mean()).square().sum();
  fit.r2 = tss > 0 ? 1.0 - (y - main.fitted).squaredNorm() / tss : 0.0;
  return fit;
}

}  // namespace

// -------------------------------------------------------------------------
// Public steps
// -------------------------------------------------------------------------

DesignFit step_main(const ModelStructure& structure, const Dataset& data) {
  const BlockProblem problem(structure, data);
  return problem.fit_main(problem.weights_of(structure), std::nullopt);
}

ScoreStep step_score(const ModelStructure& structure, const Dataset& data, ScoreRole target,
                     const VectorXd& coefficients) {
  const BlockProblem problem(structure, data);
  if (structure.score(target).fixed()) {
    throw UsageError("score '" + structure.score(target).name() + "' has fixed weights");
  }
  if (coefficients.size() != problem.layout().size()) {
    throw UsageError("expected " + std::to_string(problem.layout().size()) +
                     " main coefficients, got " + std::to_string(coefficients.size()));
  }
  return problem.fit_score(target, coefficients, problem.weights_of(structure));
}

LegitFit fit_alternating(const ModelStructure& structure, const Dataset& data,
                         const FitOptions& options) {
  structure.validate();
  WeightMap start;
  for (ScoreRole role : structure.roles()) {
    const ScoreSpec& spec = structure.score(role);
    auto it = options.start_weights.find(role);
    if (it != options.start_weights.end() && !spec.fixed()) {
      start.emplace(role, spec.with_weights(it->second).weights());
    } else {
      start.emplace(role, spec.weights());
    }
  }

  LegitFit best = run_alternating(structure, data, options, start);
  if (options.restarts > 0) {
    std::mt19937_64 rng(options.seed);
    std::bernoulli_distribution coin(0.5);
    for (int r = 0; r < options.restarts; ++r) {
      WeightMap w = start;
      for (ScoreRole role : structure.roles()) {
        const ScoreSpec& spec = structure.score(role);
        if (spec.fixed()) continue;
        VectorXd v(spec.size());
        for (Index j = 0; j < v.size(); ++j) v(j) = coin(rng) ? 1.0 : -1.0;
        w[role] = v / static_cast<double>(v.size());
      }
      try {
        LegitFit candidate = run_alternating(structure, data, options, w);
        if (candidate.objective() < best.objective()) best = std::move(candidate);
      } catch (const NumericalError&) {
        // A bad random start does not invalidate the primary run.
      }
    }
  }
  return best;
}

// -------------------------------------------------------------------------
// Parameterizations and prediction
// -------------------------------------------------------------------------

LegitFit flip_scores(const LegitFit& fit, const std::vector<ScoreRole>& roles) {
  LegitFit out = fit;
  for (ScoreRole role : roles) {
    ScoreSpec& spec = out.structure.score(role);
    spec = spec.with_weights(-spec.weights());
    for (Index c = 0; c < out.layout.size(); ++c) {
      if (out.layout.contains(c, role)) out.coefficients(c) = -out.coefficients(c);
    }
    out.flipped[role] = !out.flipped[role];
  }
  return out;
}

LegitFit canonicalize(const LegitFit& fit) {
  std::vector<ScoreRole> to_flip;
  for (ScoreRole role : fit.structure.roles()) {
    const ScoreSpec& spec = fit.structure.score(role);
    if (spec.fixed()) continue;
    Index largest = 0;
    spec.weights().cwiseAbs().maxCoeff(&largest);
    if (spec.weights()(largest) < 0) to_flip.push_back(role);
  }
  LegitFit out = flip_scores(fit, to_flip);
  for (ScoreRole role : fit.structure.roles()) {
    out.flipped[role] = std::find(to_flip.begin(), to_flip.end(), role) != to_flip.end();
  }
  return out;
}

VectorXd linear_predictor(const LegitFit& fit, const Dataset& data) {
  const BlockProblem problem(fit.structure, data);
  return problem.main_design(problem.weights_of(fit.structure)) * fit.coefficients;
}

VectorXd predict(const LegitFit& fit, const Dataset& data) {
  const BlockProblem problem(fit.structure, data);
  return problem.mean(problem.main_design(problem.weights_of(fit.structure)) * fit.coefficients);
}

}  // namespace gxe
