#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gxe {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// -------------------------------------------------------------------------
// Data table
// -------------------------------------------------------------------------

/// Columnar numeric table with a designated outcome and an optional
/// subject grouping for repeated measures. Immutable after construction.
class Dataset {
 public:
  Dataset(std::map<std::string, VectorXd> columns, std::string outcome,
          std::optional<std::string> subject_id = std::nullopt,
          std::size_t dropped_rows = 0);

  Index rows() const noexcept { return rows_; }
  bool has_column(const std::string& name) const;
  /// Throws UsageError naming the column when it does not exist.
  const VectorXd& column(const std::string& name) const;
  std::vector<std::string> column_names() const;

  const std::string& outcome_name() const noexcept { return outcome_; }
  const VectorXd& outcome() const { return column(outcome_); }
  const std::optional<std::string>& subject_id() const noexcept { return subject_id_; }

  /// Dense subject index (0..subject_count()-1) for every row. Without a
  /// subject column every row is its own subject.
  const std::vector<int>& subjects() const noexcept { return subjects_; }
  int subject_count() const noexcept { return subject_count_; }

  /// Rows removed at load time because a used column was missing.
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }

  Dataset subset(std::span<const Index> rows) const;
  Dataset with_column(const std::string& name, VectorXd values) const;

 private:
  std::map<std::string, VectorXd> columns_;
  std::string outcome_;
  std::optional<std::string> subject_id_;
  Index rows_ = 0;
  std::vector<int> subjects_;
  int subject_count_ = 0;
  std::size_t dropped_rows_ = 0;
};

struct LoadOptions {
  std::string outcome;
  std::optional<std::string> subject_id;
  /// Columns the model uses. Only these are parsed and checked for missing
  /// values; empty means every column.
  std::vector<std::string> columns;
  char delimiter = ',';
};

/// Reads a delimited text table with a header row. Empty cells (and NA/NaN)
/// are missing; rows missing any used column are dropped and counted.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options);

// -------------------------------------------------------------------------
// Scores
// -------------------------------------------------------------------------

/// One term of a score: a single column, or the product of several columns
/// for within-score interactions.
struct ScoreElement {
  std::vector<std::string> factors;

  ScoreElement() = default;
  ScoreElement(std::initializer_list<std::string> f) : factors(f) {}
  explicit ScoreElement(std::vector<std::string> f) : factors(std::move(f)) {}

  /// Parses "g1" or "g1*g3".
  static ScoreElement parse(const std::string& text);
  /// Factors joined with '*'.
  std::string label() const;
  /// Same factors regardless of order.
  bool same_as(const ScoreElement& other) const;
};

/// A named latent score: ordered elements and their L1-normalized weights.
class ScoreSpec {
 public:
  /// Without weights the score starts from equal weights 1/n_s. Supplied
  /// weights that do not have unit L1 norm are re-normalized with a warning.
  ScoreSpec(std::string name, std::vector<ScoreElement> elements,
            std::optional<VectorXd> weights = std::nullopt, bool fixed = false);

  const std::string& name() const noexcept { return name_; }
  const std::vector<ScoreElement>& elements() const noexcept { return elements_; }
  const VectorXd& weights() const noexcept { return weights_; }
  bool fixed() const noexcept { return fixed_; }
  Index size() const noexcept { return static_cast<Index>(elements_.size()); }

  /// Index of the element with the given factors, if present.
  std::optional<Index> find(const ScoreElement& element) const;

  ScoreSpec with_weights(const VectorXd& weights) const;
  ScoreSpec with_fixed(bool fixed) const;
  /// Appends an element. The existing weights shrink by n/(n+1) and the new
  /// element starts at +1/(n+1).
  ScoreSpec with_element(const ScoreElement& element) const;
  /// Removes an element and renormalizes the remaining weights.
  ScoreSpec without_element(Index index) const;

 private:
  std::string name_;
  std::vector<ScoreElement> elements_;
  VectorXd weights_;
  bool fixed_ = false;
};

/// Rescales a vector to unit L1 norm, preserving signs. Throws
/// NumericalError on a zero vector.
VectorXd normalize_l1(const VectorXd& raw);

// -------------------------------------------------------------------------
// Model skeleton
// -------------------------------------------------------------------------

enum class ModelKind { TwoWay, ThreeWay };
enum class Family { Gaussian, Binomial };
enum class ScoreRole { Genetic, Env1, Env2 };

std::string to_string(ModelKind kind);
std::string to_string(Family family);
std::string to_string(ScoreRole role);

struct ModelStructure {
  ModelKind kind = ModelKind::TwoWay;
  ScoreSpec genetic;
  ScoreSpec env1;
  std::optional<ScoreSpec> env2;
  std::vector<std::string> covariates;
  /// Indicator columns replacing the single intercept. Empty means one
  /// constant intercept.
  std::vector<std::string> intercepts;
  Family family = Family::Gaussian;

  static ModelStructure two_way(ScoreSpec genetic, ScoreSpec env,
                                std::vector<std::string> covariates = {},
                                Family family = Family::Gaussian);
  static ModelStructure three_way(ScoreSpec genetic, ScoreSpec env1, ScoreSpec env2,
                                  std::vector<std::string> covariates = {},
                                  Family family = Family::Gaussian);

  /// Genetic, Env1 and (three-way) Env2.
  std::vector<ScoreRole> roles() const;
  const ScoreSpec& score(ScoreRole role) const;
  ScoreSpec& score(ScoreRole role);

  /// Every data column the model reads, outcome excluded.
  std::vector<std::string> used_columns() const;

  /// Structural checks: kind/env2 agreement, distinct score names.
  void validate() const;
  /// Checks against data: columns exist, intercept indicators partition the
  /// rows, binomial outcomes are 0/1.
  void validate(const Dataset& data) const;
};

/// Column j is the elementwise product of the factors of element j.
MatrixXd expand_score_columns(const ScoreSpec& score, const Dataset& data);

/// expand_score_columns(score, data) * weights.
VectorXd compute_score(const ScoreSpec& score, const Dataset& data);

}  // namespace gxe
