#include <doctest.h>

#include "helpers.hpp"

#include "gxe/errors.hpp"
#include "gxe/log.hpp"
#include "gxe/model_config.hpp"

#include <string>

using namespace gxe;
using testing::temp_file;
using testing::vec;

namespace {

Dataset tiny(std::map<std::string, VectorXd> cols) { return Dataset(std::move(cols), "y"); }

struct CaptureWarnings {
  std::vector<std::string> messages;
  WarningHandler previous;
  CaptureWarnings() {
    previous = set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_handler(previous); }
};

}  // namespace

// -------------------------------------------------------------------------
// Loading
// -------------------------------------------------------------------------

TEST_CASE("load: complete rows are kept") {
  const auto path = temp_file("complete.csv", "x,y\n1,2\n3,4\n5,6\n");
  const Dataset d = load_dataset(path, {"y", std::nullopt, {"x", "y"}, ','});
  CHECK(d.rows() == 3);
  CHECK(d.dropped_rows() == 0);
  CHECK(d.column("x")(2) == 5.0);
}

TEST_CASE("load: a row missing the outcome is dropped and counted") {
  const auto path = temp_file("missing.csv", "x,y\n1,2\n3,\n5,6\n");
  const Dataset d = load_dataset(path, {"y", std::nullopt, {"x", "y"}, ','});
  CHECK(d.rows() == 2);
  CHECK(d.dropped_rows() == 1);
  CHECK(d.outcome()(1) == 6.0);
}

TEST_CASE("load: missing markers and unused columns") {
  const auto path = temp_file("markers.csv", "x,y,junk\n1,2,abc\nNA,4,\n5,6,zz\n.,1,\n");
  const Dataset d = load_dataset(path, {"y", std::nullopt, {"x", "y"}, ','});
  CHECK(d.rows() == 2);
  CHECK(d.dropped_rows() == 2);
  CHECK_FALSE(d.has_column("junk"));
}

TEST_CASE("load: absent outcome column names the column") {
  const auto path = temp_file("absent.csv", "x,z\n1,2\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, {"y", std::nullopt, {"x", "y"}, ','}),
                       doctest::Contains("missing column 'y'"), UsageError);
}

TEST_CASE("load: non-numeric value in a used column is a usage error") {
  const auto path = temp_file("text.csv", "x,y\n1,2\nfoo,4\n");
  CHECK_THROWS_AS(load_dataset(path, {"y", std::nullopt, {"x", "y"}, ','}), UsageError);
}

TEST_CASE("load: tab delimiter, quoted header and subject ids") {
  const auto path = temp_file("tab.tsv", "\"id\"\tx\ty\n7\t1\t2\n7\t2\t3\n9\t3\t4\n");
  const Dataset d = load_dataset(path, {"y", std::string("id"), {"x", "y", "id"}, '\t'});
  CHECK(d.rows() == 3);
  CHECK(d.subject_count() == 2);
  CHECK(d.subjects()[0] == d.subjects()[1]);
  CHECK(d.subjects()[0] != d.subjects()[2]);
}

// -------------------------------------------------------------------------
// Scores
// -------------------------------------------------------------------------

TEST_CASE("expand: passthrough, product and zero columns") {
  const Dataset d = tiny({{"g1", vec({1, 1, 0})},
                          {"g2", vec({0, 0, 0})},
                          {"g3", vec({1, 0, 1})},
                          {"y", vec({0, 0, 0})}});
  const ScoreSpec s("G", {{"g1"}, {"g1", "g3"}, {"g2", "g3"}});
  const MatrixXd cols = expand_score_columns(s, d);
  CHECK(cols.col(0) == vec({1, 1, 0}));
  CHECK(cols.col(1) == vec({1, 0, 0}));
  CHECK(cols.col(2) == vec({0, 0, 0}));
}

TEST_CASE("expand: element g1 on (0,1,1) passes through") {
  const Dataset d = tiny({{"g1", vec({0, 1, 1})}, {"y", vec({0, 0, 0})}});
  CHECK(expand_score_columns(ScoreSpec("G", {{"g1"}}), d).col(0) == vec({0, 1, 1}));
}

TEST_CASE("compute_score with the simulation's genetic weights") {
  const ScoreSpec s("G", {{"g1"}, {"g2"}, {"g3"}, {"g4"}, {"g1", "g3"}, {"g2", "g3"}},
                    vec({.2, .15, -.3, .1, .05, .2}));
  const Dataset d = tiny({{"g1", vec({1, 0, 0})},
                          {"g2", vec({0, 1, 0})},
                          {"g3", vec({0, 1, 0})},
                          {"g4", vec({0, 0, 0})},
                          {"y", vec({0, 0, 0})}});
  const VectorXd score = compute_score(s, d);
  CHECK(score(0) == doctest::Approx(.2).epsilon(1e-15));
  CHECK(score(1) == doctest::Approx(.05).epsilon(1e-12));
  CHECK(score(2) == 0.0);
  CHECK(s.weights().lpNorm<1>() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compute_score: equal weights on an all-zero genotype") {
  const ScoreSpec s("G", {{"g1"}, {"g2"}, {"g3"}, {"g4"}});
  CHECK(s.weights() == vec({.25, .25, .25, .25}));
  const Dataset d = tiny({{"g1", vec({0})}, {"g2", vec({0})}, {"g3", vec({0})}, {"g4", vec({0})},
                          {"y", vec({0})}});
  CHECK(compute_score(s, d)(0) == 0.0);
}

TEST_CASE("compute_score is linear in the weights") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::map<std::string, VectorXd> cols;
  for (auto n : {"a", "b", "c", "y"}) {
    VectorXd v(10);
    for (Index i = 0; i < 10; ++i) v(i) = nd(rng);
    cols[n] = v;
  }
  const Dataset d = tiny(cols);
  const std::vector<ScoreElement> el = {{"a"}, {"b"}, {"a", "c"}};
  const MatrixXd X = expand_score_columns(ScoreSpec("S", el), d);
  const VectorXd p1 = vec({.5, -.2, .3}), p2 = vec({-.1, .6, .3});
  const double alpha = 0.3;
  const VectorXd mixed = X * (alpha * p1 + (1 - alpha) * p2);
  const VectorXd combo = alpha * (X * p1) + (1 - alpha) * (X * p2);
  CHECK((mixed - combo).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("normalize_l1") {
  CHECK(normalize_l1(vec({2, -2})) == vec({.5, -.5}));
  CHECK(normalize_l1(vec({1, 1, 1, 1})) == vec({.25, .25, .25, .25}));
  CHECK_THROWS_AS(normalize_l1(vec({0, 0})), NumericalError);
}

TEST_CASE("score weights off the unit L1 sphere are renormalized with a warning") {
  CaptureWarnings w;
  const ScoreSpec s("G", {{"g1"}, {"g2"}}, vec({2, 2}));
  CHECK(s.weights() == vec({.5, .5}));
  CHECK(w.messages.size() == 1);
  const ScoreSpec ok("G", {{"g1"}, {"g2"}}, vec({.5, -.5}));
  CHECK(w.messages.size() == 1);
  CHECK(ok.weights().lpNorm<1>() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("ScoreElement parsing and identity") {
  const auto e = ScoreElement::parse("g1*g3");
  CHECK(e.factors == std::vector<std::string>{"g1", "g3"});
  CHECK(e.label() == "g1*g3");
  CHECK(e.same_as(ScoreElement::parse("g3*g1")));
  CHECK_THROWS_AS(ScoreSpec("G", {{"g1"}, {"g1"}}), UsageError);
}

TEST_CASE("with_element and without_element keep unit L1 norm") {
  const ScoreSpec s("G", {{"g1"}, {"g2"}}, vec({.75, -.25}));
  const ScoreSpec grown = s.with_element({"g3"});
  CHECK(grown.size() == 3);
  CHECK(grown.weights()(2) == doctest::Approx(1.0 / 3));
  CHECK(grown.weights().lpNorm<1>() == doctest::Approx(1.0));
  const ScoreSpec shrunk = grown.without_element(0);
  CHECK(shrunk.size() == 2);
  CHECK(shrunk.weights().lpNorm<1>() == doctest::Approx(1.0));
  CHECK_THROWS_AS(ScoreSpec("G", {{"g1"}}).without_element(0), UsageError);
}

// -------------------------------------------------------------------------
// Model structure
// -------------------------------------------------------------------------

TEST_CASE("validate: intercept indicators must partition the rows") {
  const Dataset d = tiny({{"g", vec({1, 0, 1, 0})},
                          {"e", vec({1, 2, 3, 4})},
                          {"a", vec({1, 1, 0, 0})},
                          {"b", vec({0, 0, 1, 1})},
                          {"c", vec({0, 1, 1, 1})},
                          {"y", vec({1, 2, 3, 4})}});
  ModelStructure m = ModelStructure::two_way(ScoreSpec("G", {{"g"}}), ScoreSpec("E", {{"e"}}));
  m.intercepts = {"a", "b"};
  CHECK_NOTHROW(m.validate(d));
  m.intercepts = {"a", "c"};
  CHECK_THROWS_AS(m.validate(d), UsageError);
}

TEST_CASE("validate: binomial outcome must be 0/1; score names distinct") {
  const Dataset d = tiny({{"g", vec({1, 0})}, {"e", vec({1, 2})}, {"y", vec({0, 2})}});
  ModelStructure m = ModelStructure::two_way(ScoreSpec("G", {{"g"}}), ScoreSpec("E", {{"e"}}), {},
                                             Family::Binomial);
  CHECK_THROWS_AS(m.validate(d), UsageError);
  ModelStructure dup = ModelStructure::two_way(ScoreSpec("S", {{"g"}}), ScoreSpec("S", {{"e"}}));
  CHECK_THROWS_AS(dup.validate(), UsageError);
}

TEST_CASE("subject grouping and subsets") {
  std::map<std::string, VectorXd> cols{{"id", vec({3, 3, 8, 8, 1})}, {"y", vec({1, 2, 3, 4, 5})}};
  const Dataset d(cols, "y", std::string("id"));
  CHECK(d.subject_count() == 3);
  const std::vector<Index> rows{2, 3};
  const Dataset s = d.subset(rows);
  CHECK(s.rows() == 2);
  CHECK(s.subject_count() == 1);
  CHECK(s.outcome() == vec({3, 4}));
}

// -------------------------------------------------------------------------
// Model config
// -------------------------------------------------------------------------

TEST_CASE("model config: full document") {
  const std::string text = R"({
    "outcome": "y", "subject_id": "id", "kind": "three_way", "family": "gaussian",
    "intercepts": ["a", "b"], "covariates": ["age"],
    "scores": {
      "genetic": {"name": "G", "elements": ["g1", "g1*g3"], "weights": [0.5, -0.5]},
      "env1": {"name": "E", "elements": ["e1", "e2"]},
      "env2": {"name": "Z", "elements": ["z"], "fixed": true}
    },
    "candidates": {"genetic": ["g2"], "covariates": ["sex"]}
  })";
  const ModelConfig c = parse_model_config(text);
  CHECK(c.outcome == "y");
  CHECK(c.subject_id == std::optional<std::string>("id"));
  CHECK(c.structure.kind == ModelKind::ThreeWay);
  CHECK(c.structure.genetic.weights() == vec({.5, -.5}));
  CHECK(c.structure.env2->fixed());
  CHECK(c.structure.intercepts.size() == 2);
  CHECK(c.candidates.elements.at(ScoreRole::Genetic).size() == 1);
  CHECK(c.candidates.covariates == std::vector<std::string>{"sex"});
  const auto cols = c.data_columns();
  CHECK(std::find(cols.begin(), cols.end(), "id") != cols.end());
  CHECK(std::find(cols.begin(), cols.end(), "g3") != cols.end());
}

TEST_CASE("model config: unknown keys are rejected") {
  CHECK_THROWS_WITH_AS(parse_model_config(R"({"outcome":"y","colour":1,"scores":{}})"),
                       doctest::Contains("colour"), UsageError);
  CHECK_THROWS_WITH_AS(
      parse_model_config(
          R"({"outcome":"y","scores":{"genetic":{"elements":["g"],"wieghts":[1]},"env1":{"elements":["e"]}}})"),
      doctest::Contains("wieghts"), UsageError);
}

TEST_CASE("model config: kind must agree with env2") {
  CHECK_THROWS_AS(
      parse_model_config(
          R"({"outcome":"y","kind":"three_way","scores":{"genetic":{"elements":["g"]},"env1":{"elements":["e"]}}})"),
      UsageError);
  CHECK_THROWS_AS(parse_model_config("not json"), UsageError);
}
