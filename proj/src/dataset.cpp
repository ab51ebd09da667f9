#include "gxe/dataset.hpp"

#include "gxe/errors.hpp"
#include "gxe/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace gxe {

namespace {

constexpr double kL1Tolerance = 1e-10;

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

// Splits one line, honoring double-quoted fields.
std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".";
}

std::optional<double> parse_number(const std::string& cell) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && cell.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

// -------------------------------------------------------------------------
// Dataset
// -------------------------------------------------------------------------

Dataset::Dataset(std::map<std::string, VectorXd> columns, std::string outcome,
                 std::optional<std::string> subject_id, std::size_t dropped_rows)
    : columns_(std::move(columns)),
      outcome_(std::move(outcome)),
      subject_id_(std::move(subject_id)),
      dropped_rows_(dropped_rows) {
  if (!columns_.count(outcome_)) throw UsageError("missing column '" + outcome_ + "'");
  rows_ = columns_.at(outcome_).size();
  if (rows_ < 1) throw UsageError("dataset has no rows");
  for (const auto& [name, values] : columns_) {
    if (values.size() != rows_) {
      throw UsageError("column '" + name + "' has " + std::to_string(values.size()) +
                       " rows, expected " + std::to_string(rows_));
    }
  }
  if (!columns_.at(outcome_).allFinite()) {
    throw UsageError("outcome column '" + outcome_ + "' contains non-finite values");
  }

  subjects_.resize(static_cast<std::size_t>(rows_));
  if (subject_id_) {
    if (!columns_.count(*subject_id_)) {
      throw UsageError("missing column '" + *subject_id_ + "'");
    }
    const VectorXd& ids = columns_.at(*subject_id_);
    std::unordered_map<double, int> index;
    for (Index i = 0; i < rows_; ++i) {
      auto [it, inserted] = index.try_emplace(ids(i), static_cast<int>(index.size()));
      subjects_[static_cast<std::size_t>(i)] = it->second;
    }
    subject_count_ = static_cast<int>(index.size());
  } else {
    for (Index i = 0; i < rows_; ++i) subjects_[static_cast<std::size_t>(i)] = static_cast<int>(i);
    subject_count_ = static_cast<int>(rows_);
  }
}

bool Dataset::has_column(const std::string& name) const { return columns_.count(name) > 0; }

const VectorXd& Dataset::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw UsageError("missing column '" + name + "'");
  return it->second;
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& [name, _] : columns_) names.push_back(name);
  return names;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  std::map<std::string, VectorXd> picked;
  for (const auto& [name, values] : columns_) {
    VectorXd v(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<Index>(i)) = values(rows[i]);
    picked.emplace(name, std::move(v));
  }
  return Dataset(std::move(picked), outcome_, subject_id_, 0);
}

Dataset Dataset::with_column(const std::string& name, VectorXd values) const {
  auto columns = columns_;
  columns[name] = std::move(values);
  return Dataset(std::move(columns), outcome_, subject_id_, dropped_rows_);
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw UsageError("data file '" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line, options.delimiter);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);

  std::vector<std::string> wanted = options.columns;
  if (wanted.empty()) wanted = header;
  auto require = [&](const std::string& name) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) wanted.push_back(name);
  };
  require(options.outcome);
  if (options.subject_id) require(*options.subject_id);

  std::vector<std::size_t> source;
  for (const auto& name : wanted) {
    auto it = position.find(name);
    if (it == position.end()) throw UsageError("missing column '" + name + "'");
    source.push_back(it->second);
  }

  std::vector<std::vector<double>> values(wanted.size());
  std::size_t dropped = 0;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, options.delimiter);
    if (cells.size() != header.size()) {
      throw UsageError("line " + std::to_string(line_number) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    std::vector<double> row(wanted.size());
    bool missing = false;
    for (std::size_t c = 0; c < wanted.size(); ++c) {
      const std::string& cell = cells[source[c]];
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      auto number = parse_number(cell);
      if (!number) {
        throw UsageError("non-numeric value '" + cell + "' in column '" + wanted[c] +
                         "' at line " + std::to_string(line_number));
      }
      row[c] = *number;
    }
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t c = 0; c < wanted.size(); ++c) values[c].push_back(row[c]);
  }

  std::map<std::string, VectorXd> columns;
  for (std::size_t c = 0; c < wanted.size(); ++c) {
    columns.emplace(wanted[c], Eigen::Map<const VectorXd>(values[c].data(),
                                                          static_cast<Index>(values[c].size())));
  }
  if (values.front().empty()) throw UsageError("no complete rows in '" + path.string() + "'");
  return Dataset(std::move(columns), options.outcome, options.subject_id, dropped);
}

// -------------------------------------------------------------------------
// Scores
// -------------------------------------------------------------------------

ScoreElement ScoreElement::parse(const std::string& text) {
  ScoreElement element;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '*')) {
    part = trim(part);
    if (part.empty()) throw UsageError("malformed score element '" + text + "'");
    element.factors.push_back(part);
  }
  if (element.factors.empty()) throw UsageError("empty score element");
  return element;
}

std::string ScoreElement::label() const {
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += '*';
    out += factors[i];
  }
  return out;
}

bool ScoreElement::same_as(const ScoreElement& other) const {
  return std::multiset<std::string>(factors.begin(), factors.end()) ==
         std::multiset<std::string>(other.factors.begin(), other.factors.end());
}

VectorXd normalize_l1(const VectorXd& raw) {
  const double norm = raw.lpNorm<1>();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalError("cannot L1-normalize a zero or non-finite weight vector");
  }
  return raw / norm;
}

ScoreSpec::ScoreSpec(std::string name, std::vector<ScoreElement> elements,
                     std::optional<VectorXd> weights, bool fixed)
    : name_(std::move(name)), elements_(std::move(elements)), fixed_(fixed) {
  if (name_.empty()) throw UsageError("score name must not be empty");
  if (elements_.empty()) throw UsageError("score '" + name_ + "' has no elements");
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& f = elements_[i].factors;
    if (f.empty()) throw UsageError("score '" + name_ + "' has an empty element");
    if (std::set<std::string>(f.begin(), f.end()).size() != f.size()) {
      throw UsageError("element '" + elements_[i].label() + "' of score '" + name_ +
                       "' repeats a factor");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (elements_[i].same_as(elements_[j])) {
        throw UsageError("score '" + name_ + "' lists element '" + elements_[i].label() +
                         "' twice");
      }
    }
  }

  const Index n = size();
  if (!weights) {
    weights_ = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return;
  }
  if (weights->size() != n) {
    throw UsageError("score '" + name_ + "' has " + std::to_string(n) + " elements but " +
                     std::to_string(weights->size()) + " weights");
  }
  const double norm = weights->lpNorm<1>();
  if (std::abs(norm - 1.0) > kL1Tolerance) {
    warn("weights of score '" + name_ + "' have L1 norm " + std::to_string(norm) +
         "; re-normalized");
  }
  weights_ = normalize_l1(*weights);
}

std::optional<Index> ScoreSpec::find(const ScoreElement& element) const {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i].same_as(element)) return static_cast<Index>(i);
  }
  return std::nullopt;
}

ScoreSpec ScoreSpec::with_weights(const VectorXd& weights) const {
  return ScoreSpec(name_, elements_, weights, fixed_);
}

ScoreSpec ScoreSpec::with_fixed(bool fixed) const {
  return ScoreSpec(name_, elements_, weights_, fixed);
}

ScoreSpec ScoreSpec::with_element(const ScoreElement& element) const {
  auto elements = elements_;
  elements.push_back(element);
  const double n = static_cast<double>(size());
  VectorXd w(size() + 1);
  w.head(size()) = weights_ * (n / (n + 1.0));
  w(size()) = 1.0 / (n + 1.0);
  return ScoreSpec(name_, std::move(elements), w, fixed_);
}

ScoreSpec ScoreSpec::without_element(Index index) const {
  if (size() < 2) throw UsageError("cannot remove the last element of score '" + name_ + "'");
  auto elements = elements_;
  elements.erase(elements.begin() + index);
  VectorXd w(size() - 1);
  for (Index i = 0, k = 0; i < size(); ++i) {
    if (i != index) w(k++) = weights_(i);
  }
  if (w.lpNorm<1>() == 0.0) w.setConstant(1.0 / static_cast<double>(w.size()));
  return ScoreSpec(name_, std::move(elements), normalize_l1(w), fixed_);
}

MatrixXd expand_score_columns(const ScoreSpec& score, const Dataset& data) {
  MatrixXd out(data.rows(), score.size());
  for (Index j = 0; j < score.size(); ++j) {
    const auto& factors = score.elements()[static_cast<std::size_t>(j)].factors;
    out.col(j) = data.column(factors.front());
    for (std::size_t f = 1; f < factors.size(); ++f) {
      out.col(j).array() *= data.column(factors[f]).array();
    }
  }
  return out;
}

VectorXd compute_score(const ScoreSpec& score, const Dataset& data) {
  return expand_score_columns(score, data) * score.weights();
}

// -------------------------------------------------------------------------
// Model structure
// -------------------------------------------------------------------------

std::string to_string(ModelKind kind) {
  return kind == ModelKind::TwoWay ? "two_way" : "three_way";
}

std::string to_string(Family family) {
  return family == Family::Gaussian ? "gaussian" : "binomial";
}

std::string to_string(ScoreRole role) {
  switch (role) {
    case ScoreRole::Genetic: return "genetic";
    case ScoreRole::Env1: return "env1";
    case ScoreRole::Env2: return "env2";
  }
  return "?";
}

ModelStructure ModelStructure::two_way(ScoreSpec genetic, ScoreSpec env,
                                       std::vector<std::string> covariates, Family family) {
  return ModelStructure{ModelKind::TwoWay, std::move(genetic), std::move(env), std::nullopt,
                        std::move(covariates), {}, family};
}

ModelStructure ModelStructure::three_way(ScoreSpec genetic, ScoreSpec env1, ScoreSpec env2,
                                         std::vector<std::string> covariates, Family family) {
  return ModelStructure{ModelKind::ThreeWay, std::move(genetic), std::move(env1),
                        std::move(env2), std::move(covariates), {}, family};
}

std::vector<ScoreRole> ModelStructure::roles() const {
  if (env2) return {ScoreRole::Genetic, ScoreRole::Env1, ScoreRole::Env2};
  return {ScoreRole::Genetic, ScoreRole::Env1};
}

const ScoreSpec& ModelStructure::score(ScoreRole role) const {
  switch (role) {
    case ScoreRole::Genetic: return genetic;
    case ScoreRole::Env1: return env1;
    case ScoreRole::Env2:
      if (!env2) throw UsageError("model has no second environmental score");
      return *env2;
  }
  throw UsageError("unknown score role");
}

ScoreSpec& ModelStructure::score(ScoreRole role) {
  return const_cast<ScoreSpec&>(std::as_const(*this).score(role));
}

std::vector<std::string> ModelStructure::used_columns() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  };
  for (const auto& name : intercepts) add(name);
  for (ScoreRole role : roles()) {
    for (const auto& element : score(role).elements()) {
      for (const auto& factor : element.factors) add(factor);
    }
  }
  for (const auto& name : covariates) add(name);
  return out;
}

void ModelStructure::validate() const {
  if ((kind == ModelKind::ThreeWay) != env2.has_value()) {
    throw UsageError(kind == ModelKind::ThreeWay
                         ? "three-way model needs a second environmental score"
                         : "two-way model must not have a second environmental score");
  }
  std::set<std::string> names;
  for (ScoreRole role : roles()) {
    if (!names.insert(score(role).name()).second) {
      throw UsageError("score name '" + score(role).name() + "' used twice");
    }
  }
  std::set<std::string> covs(covariates.begin(), covariates.end());
  if (covs.size() != covariates.size()) throw UsageError("duplicate covariate");
}

void ModelStructure::validate(const Dataset& data) const {
  validate();
  for (const auto& name : used_columns()) data.column(name);

  if (!intercepts.empty()) {
    for (Index i = 0; i < data.rows(); ++i) {
      int active = 0;
      for (const auto& name : intercepts) {
        const double v = data.column(name)(i);
        if (v == 1.0) {
          ++active;
        } else if (v != 0.0) {
          throw UsageError("intercept indicator '" + name + "' must be 0/1");
        }
      }
      if (active != 1) {
        throw UsageError("row " + std::to_string(i + 1) + " has " + std::to_string(active) +
                         " active intercept indicators, expected exactly one");
      }
    }
  }

  if (family == Family::Binomial) {
    const VectorXd& y = data.outcome();
    for (Index i = 0; i < y.size(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) {
        throw UsageError("binomial outcome '" + data.outcome_name() + "' must be 0/1");
      }
    }
  }
}

}  // namespace gxe
