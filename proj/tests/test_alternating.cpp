#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"

#include "gxe/alternating.hpp"
#include "gxe/errors.hpp"

#include <cmath>
#include <random>

using namespace gxe;
using testing::equal_start;
using testing::random_instance;
using testing::vec;

namespace {

bool trace_monotone(const LegitFit& f) {
  for (std::size_t i = 1; i < f.objective_trace.size(); ++i) {
    const double prev = f.objective_trace[i - 1];
    if (f.objective_trace[i] > prev + 1e-8 * std::abs(prev) + 1e-14 * f.objective_trace[0]) {
      return false;
    }
  }
  return true;
}

FitOptions tight() {
  FitOptions o;
  o.delta = 1e-11;
  o.max_iterations = 2000;
  return o;
}

/// Sign of the largest-magnitude element.
double dominant_sign(const VectorXd& w) {
  Index j = 0;
  w.cwiseAbs().maxCoeff(&j);
  return w(j) < 0 ? -1.0 : 1.0;
}

}  // namespace

// -------------------------------------------------------------------------
// Layout
// -------------------------------------------------------------------------

TEST_CASE("coefficient layout order") {
  const ModelStructure two = ModelStructure::two_way(ScoreSpec("G", {{"g"}}), ScoreSpec("E", {{"e"}}), {"age"});
  const auto l2 = CoefficientLayout::of(two);
  CHECK(l2.names == std::vector<std::string>{"(Intercept)", "E", "G", "E:G", "age"});
  CHECK(l2.contains(3, ScoreRole::Genetic));
  CHECK(l2.contains(3, ScoreRole::Env1));
  CHECK_FALSE(l2.contains(4, ScoreRole::Genetic));

  ModelStructure three = ModelStructure::three_way(ScoreSpec("G", {{"g"}}), ScoreSpec("E", {{"e"}}),
                                                   ScoreSpec("Z", {{"z"}}));
  three.intercepts = {"a", "b"};
  const auto l3 = CoefficientLayout::of(three);
  CHECK(l3.names == std::vector<std::string>{"a", "b", "E", "Z", "G", "E:Z", "E:G", "Z:G", "E:Z:G"});
  CHECK(l3.intercept_count == 2);
  CHECK(l3.term_count == 7);
}

// -------------------------------------------------------------------------
// Block steps
// -------------------------------------------------------------------------

TEST_CASE("step_score recovers the genetic weights on noiseless data in one block") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = random_instance(rng, false, 5, 3, 300, 0.0);
    const ScoreStep s = step_score(inst.truth, inst.data, ScoreRole::Genetic, inst.beta);
    CHECK((normalize_l1(s.raw_weights) - inst.truth.genetic.weights()).cwiseAbs().maxCoeff() < 1e-8);
    const ScoreStep e = step_score(inst.truth, inst.data, ScoreRole::Env1, inst.beta);
    CHECK((normalize_l1(e.raw_weights) - inst.truth.env1.weights()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("step_score with one element is the least-squares ratio") {
  std::mt19937_64 rng(7);
  const auto inst = random_instance(rng, false, 1, 2, 50, 1.0);
  const VectorXd beta = vec({0.5, 1.2, -0.8, 2.0});
  const VectorXd E = compute_score(inst.truth.env1, inst.data);
  const VectorXd g = inst.data.column("g1");
  const VectorXd y = inst.data.outcome();
  const VectorXd r0 = (beta(0) + beta(1) * E.array()).matrix();
  const VectorXd r1 = (beta(2) + beta(3) * E.array()).matrix();
  const VectorXd x = r1.cwiseProduct(g);
  const double ratio = x.dot(y - r0) / x.squaredNorm();
  const ScoreStep s = step_score(inst.truth, inst.data, ScoreRole::Genetic, beta);
  CHECK(s.raw_weights(0) == doctest::Approx(ratio).epsilon(1e-12));
  CHECK(std::abs(normalize_l1(s.raw_weights)(0)) == 1.0);
}

TEST_CASE("binomial step_score equals a frozen full-likelihood refit") {
  std::mt19937_64 rng(41);
  const auto inst = random_instance(rng, false, 4, 2, 400, 0.0, Family::Binomial);
  const VectorXd beta = inst.beta;
  const VectorXd E = compute_score(inst.truth.env1, inst.data);
  const MatrixXd G = expand_score_columns(inst.truth.genetic, inst.data);
  const VectorXd r0 = (beta(0) + beta(1) * E.array()).matrix();
  const VectorXd r1 = (beta(2) + beta(3) * E.array()).matrix();
  const MatrixXd X = r1.asDiagonal() * G;
  const VectorXd ref = oracle::logistic_newton(X, inst.data.outcome(), r0);
  const ScoreStep s = step_score(inst.truth, inst.data, ScoreRole::Genetic, beta);
  CHECK((s.raw_weights - ref).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("step_score: vanishing r1 is unidentified") {
  std::mt19937_64 rng(8);
  const auto inst = random_instance(rng, false, 3, 2, 60, 1.0);
  CHECK_THROWS_AS(step_score(inst.truth, inst.data, ScoreRole::Genetic, vec({1, 1, 0, 0})),
                  UnidentifiedError);
}

TEST_CASE("step_main with true weights on noiseless data recovers beta exactly") {
  std::mt19937_64 rng(9);
  const auto inst = random_instance(rng, true, 4, 2, 300, 0.0);
  const DesignFit f = step_main(inst.truth, inst.data);
  CHECK((f.coefficients - inst.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(f.objective < 1e-18);
}

// -------------------------------------------------------------------------
// Alternating fits
// -------------------------------------------------------------------------

TEST_CASE("single-element scores reduce to the classical interaction regression") {
  std::mt19937_64 rng(13);
  const auto inst = random_instance(rng, false, 1, 1, 120, 1.0);
  const LegitFit f = fit_alternating(equal_start(inst.truth), inst.data);
  CHECK(f.converged);
  MatrixXd X(120, 4);
  const VectorXd g = inst.data.column("g1"), e = inst.data.column("e1");
  X.col(0).setOnes();
  X.col(1) = e;
  X.col(2) = g;
  X.col(3) = e.cwiseProduct(g);
  const VectorXd ref = oracle::normal_equations(X, inst.data.outcome());
  CHECK((predict(f, inst.data) - X * ref).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(f.parameter_count == 5);
}

TEST_CASE("all scores fixed: one plain regression on the precomputed scores") {
  std::mt19937_64 rng(14);
  auto inst = random_instance(rng, false, 3, 2, 80, 1.0);
  ModelStructure m = inst.truth;
  m.genetic = m.genetic.with_fixed(true);
  m.env1 = m.env1.with_fixed(true);
  const LegitFit f = fit_alternating(m, inst.data);
  CHECK(f.iterations == 1);
  CHECK(f.converged);
  const VectorXd G = compute_score(m.genetic, inst.data), E = compute_score(m.env1, inst.data);
  MatrixXd X(80, 4);
  X.col(0).setOnes();
  X.col(1) = E;
  X.col(2) = G;
  X.col(3) = E.cwiseProduct(G);
  const VectorXd ref = oracle::normal_equations(X, inst.data.outcome());
  CHECK((f.coefficients - ref).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(f.weights(ScoreRole::Genetic) == m.genetic.weights());
}

TEST_CASE("identical genetic columns are rank deficient") {
  std::mt19937_64 rng(15);
  const auto inst = random_instance(rng, false, 2, 2, 80, 1.0);
  const Dataset d = inst.data.with_column("g2", inst.data.column("g1"));
  CHECK_THROWS_AS(fit_alternating(equal_start(inst.truth), d), RankDeficientError);
}

TEST_CASE("noiseless two-way and three-way data are recovered") {
  std::mt19937_64 rng(2024);
  for (bool three : {false, true}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto inst = random_instance(rng, three, 4, 2, 400, 0.0);
      FitOptions o = tight();
      o.restarts = 4;
      const LegitFit f = canonicalize(fit_alternating(equal_start(inst.truth), inst.data, o));
      CHECK(f.converged);
      CHECK(f.objective() < 1e-10);
      VectorXd beta = inst.beta;
      for (ScoreRole role : inst.truth.roles()) {
        const VectorXd w = inst.truth.score(role).weights();
        const double sgn = dominant_sign(w);
        CHECK((f.weights(role) - sgn * w).cwiseAbs().maxCoeff() < 1e-6);
        for (Index c = 0; c < beta.size(); ++c) {
          if (f.layout.contains(c, role)) beta(c) *= sgn;
        }
      }
      CHECK((f.coefficients - beta).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("objective trace is monotone on noisy fits") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(rng, trial % 2 == 1, 5, 3, 250, 2.0);
    const LegitFit f = fit_alternating(equal_start(inst.truth), inst.data);
    CHECK(trace_monotone(f));
    CHECK(f.monotone);
  }
}

TEST_CASE("binomial alternating fit: monotone deviance and weights near the truth") {
  std::mt19937_64 rng(77);
  const auto inst = random_instance(rng, false, 3, 2, 3000, 0.0, Family::Binomial);
  const LegitFit f = canonicalize(fit_alternating(equal_start(inst.truth), inst.data));
  CHECK(f.converged);
  CHECK(trace_monotone(f));
  const VectorXd w = inst.truth.genetic.weights();
  CHECK((f.weights(ScoreRole::Genetic) - dominant_sign(w) * w).cwiseAbs().maxCoeff() < 0.15);
  const VectorXd p = predict(f, inst.data);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);
}

TEST_CASE("fixed point: restarting from a converged fit stops at once") {
  std::mt19937_64 rng(5);
  const auto inst = random_instance(rng, false, 4, 3, 300, 1.5);
  const LegitFit f = fit_alternating(equal_start(inst.truth), inst.data);
  REQUIRE(f.converged);
  const LegitFit again = fit_alternating(f.structure, inst.data);
  CHECK(again.iterations == 1);
  for (ScoreRole role : f.structure.roles()) {
    CHECK((again.weights(role) - f.weights(role)).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("restarts never worsen the objective") {
  std::mt19937_64 rng(6);
  const auto inst = random_instance(rng, true, 4, 2, 200, 3.0);
  const LegitFit plain = fit_alternating(equal_start(inst.truth), inst.data);
  FitOptions o;
  o.restarts = 5;
  const LegitFit multi = fit_alternating(equal_start(inst.truth), inst.data, o);
  CHECK(multi.objective() <= plain.objective());
}

TEST_CASE("rescaling a score against its coefficients leaves predictions unchanged") {
  std::mt19937_64 rng(21);
  const auto inst = random_instance(rng, false, 3, 2, 100, 1.0);
  const LegitFit f = fit_alternating(equal_start(inst.truth), inst.data);
  const MatrixXd G = expand_score_columns(f.structure.genetic, inst.data);
  const VectorXd E = compute_score(f.structure.env1, inst.data);
  const VectorXd& b = f.coefficients;
  for (double c : {0.1, 3.0, -7.5}) {
    const VectorXd g = G * (c * f.weights(ScoreRole::Genetic));
    const VectorXd yhat = (b(0) + b(1) * E.array() + (b(2) / c) * g.array() +
                           (b(3) / c) * E.array() * g.array())
                              .matrix();
    const VectorXd ref = predict(f, inst.data);
    CHECK((yhat - ref).cwiseAbs().maxCoeff() <= 1e-10 * ref.cwiseAbs().maxCoeff());
  }
}

// -------------------------------------------------------------------------
// Parameterizations
// -------------------------------------------------------------------------

TEST_CASE("canonicalize: identity on canonical fits; sign variants agree") {
  std::mt19937_64 rng(31);
  const auto inst = random_instance(rng, false, 4, 3, 200, 1.0);
  const LegitFit f = canonicalize(fit_alternating(equal_start(inst.truth), inst.data));
  const LegitFit again = canonicalize(f);
  CHECK(again.coefficients == f.coefficients);
  for (ScoreRole r : f.structure.roles()) CHECK(again.weights(r) == f.weights(r));

  const LegitFit flipped = flip_scores(f, {ScoreRole::Genetic});
  CHECK(flipped.coefficients(2) == -f.coefficients(2));
  CHECK(flipped.coefficients(3) == -f.coefficients(3));
  CHECK(flipped.coefficients(1) == f.coefficients(1));
  CHECK((predict(flipped, inst.data) - predict(f, inst.data)).cwiseAbs().maxCoeff() < 1e-12);
  const LegitFit back = canonicalize(flipped);
  CHECK(back.coefficients == f.coefficients);
}

TEST_CASE("three-way: all eight sign variants share predictions and one canonical form") {
  std::mt19937_64 rng(32);
  const auto inst = random_instance(rng, true, 3, 2, 200, 1.0);
  const LegitFit f = fit_alternating(equal_start(inst.truth), inst.data);
  const VectorXd ref = predict(f, inst.data);
  const LegitFit canon = canonicalize(f);
  const std::vector<ScoreRole> roles = f.structure.roles();
  for (unsigned mask = 0; mask < 8; ++mask) {
    std::vector<ScoreRole> flips;
    for (unsigned b = 0; b < 3; ++b) {
      if (mask & (1u << b)) flips.push_back(roles[b]);
    }
    const LegitFit v = flip_scores(f, flips);
    CHECK((predict(v, inst.data) - ref).cwiseAbs().maxCoeff() < 1e-10);
    const LegitFit c = canonicalize(v);
    CHECK(c.coefficients == canon.coefficients);
    for (ScoreRole r : roles) CHECK(c.weights(r) == canon.weights(r));
  }
}

TEST_CASE("canonicalize leaves fixed scores alone") {
  std::mt19937_64 rng(33);
  auto inst = random_instance(rng, true, 3, 1, 200, 1.0);
  ModelStructure m = equal_start(inst.truth);
  m.env2 = ScoreSpec("Z", {{"z1"}}, vec({-1}), true);
  const LegitFit f = canonicalize(fit_alternating(m, inst.data));
  CHECK(f.weights(ScoreRole::Env2)(0) == -1.0);
}

TEST_CASE("weight standard errors exist for estimated scores only") {
  std::mt19937_64 rng(34);
  auto inst = random_instance(rng, true, 3, 2, 300, 1.0);
  ModelStructure m = equal_start(inst.truth);
  m.env2 = m.env2->with_fixed(true);
  const LegitFit f = fit_alternating(m, inst.data);
  CHECK(f.weight_se.count(ScoreRole::Genetic) == 1);
  CHECK(f.weight_se.count(ScoreRole::Env2) == 0);
  CHECK(f.weight_se.at(ScoreRole::Genetic).minCoeff() > 0.0);
  CHECK(f.coefficient_se.size() == f.coefficients.size());
  CHECK(f.parameter_count == true_parameter_count(m, true));
}
