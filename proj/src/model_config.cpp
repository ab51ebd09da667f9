#include "gxe/model_config.hpp"

#include "gxe/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gxe {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) {
      throw UsageError("unknown key '" + key + "' in " + where);
    }
  }
}

const json& require(const json& object, const std::string& key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) throw UsageError("missing key '" + key + "' in " + where);
  return *it;
}

std::string as_string(const json& value, const std::string& where) {
  if (!value.is_string()) throw UsageError(where + " must be a string");
  return value.get<std::string>();
}

std::vector<std::string> as_strings(const json& value, const std::string& where) {
  if (!value.is_array()) throw UsageError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& item : value) out.push_back(as_string(item, where));
  return out;
}

std::vector<ScoreElement> as_elements(const json& value, const std::string& where) {
  std::vector<ScoreElement> out;
  for (const auto& text : as_strings(value, where)) out.push_back(ScoreElement::parse(text));
  return out;
}

ScoreSpec parse_score(const json& node, const std::string& where, const std::string& default_name) {
  if (!node.is_object()) throw UsageError(where + " must be an object");
  reject_unknown(node, {"name", "elements", "weights", "fixed"}, where);
  const std::string name = node.contains("name") ? as_string(node["name"], where + ".name")
                                                 : default_name;
  auto elements = as_elements(require(node, "elements", where), where + ".elements");
  if (elements.empty()) throw UsageError(where + ".elements must not be empty");
  std::optional<VectorXd> weights;
  if (node.contains("weights")) {
    const json& w = node["weights"];
    if (!w.is_array() || w.size() != elements.size()) {
      throw UsageError(where + ".weights must be a list with one number per element");
    }
    VectorXd v(static_cast<Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].is_number()) throw UsageError(where + ".weights must hold numbers");
      v(static_cast<Index>(i)) = w[i].get<double>();
    }
    weights = v;
  }
  bool fixed = false;
  if (node.contains("fixed")) {
    if (!node["fixed"].is_boolean()) throw UsageError(where + ".fixed must be true or false");
    fixed = node["fixed"].get<bool>();
  }
  return ScoreSpec(name, std::move(elements), std::move(weights), fixed);
}

}  // namespace

std::vector<std::string> ModelConfig::data_columns() const {
  std::vector<std::string> cols = structure.used_columns();
  auto add = [&](const std::string& c) {
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
  };
  add(outcome);
  if (subject_id) add(*subject_id);
  for (const auto& [role, elements] : candidates.elements) {
    for (const auto& e : elements) {
      for (const auto& f : e.factors) add(f);
    }
  }
  for (const auto& c : candidates.covariates) add(c);
  return cols;
}

LoadOptions ModelConfig::load_options(char delimiter) const {
  LoadOptions options;
  options.outcome = outcome;
  options.subject_id = subject_id;
  options.columns = data_columns();
  options.delimiter = delimiter;
  return options;
}

ModelConfig parse_model_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw UsageError("model config must be a JSON object");
  reject_unknown(root,
                 {"outcome", "subject_id", "kind", "family", "scores", "covariates", "intercepts",
                  "candidates"},
                 "model config");

  const std::string outcome = as_string(require(root, "outcome", "model config"), "outcome");
  std::optional<std::string> subject;
  if (root.contains("subject_id") && !root["subject_id"].is_null()) {
    subject = as_string(root["subject_id"], "subject_id");
  }

  Family family = Family::Gaussian;
  if (root.contains("family")) {
    const std::string f = as_string(root["family"], "family");
    if (f == "gaussian") family = Family::Gaussian;
    else if (f == "binomial") family = Family::Binomial;
    else throw UsageError("family must be 'gaussian' or 'binomial', got '" + f + "'");
  }

  const json& scores = require(root, "scores", "model config");
  if (!scores.is_object()) throw UsageError("scores must be an object");
  reject_unknown(scores, {"genetic", "env1", "env2"}, "scores");
  ScoreSpec genetic = parse_score(require(scores, "genetic", "scores"), "scores.genetic", "G");
  ScoreSpec env1 = parse_score(require(scores, "env1", "scores"), "scores.env1", "E");
  std::optional<ScoreSpec> env2;
  if (scores.contains("env2")) env2 = parse_score(scores["env2"], "scores.env2", "Z");

  ModelKind kind = env2 ? ModelKind::ThreeWay : ModelKind::TwoWay;
  if (root.contains("kind")) {
    const std::string k = as_string(root["kind"], "kind");
    if (k == "two_way") kind = ModelKind::TwoWay;
    else if (k == "three_way") kind = ModelKind::ThreeWay;
    else throw UsageError("kind must be 'two_way' or 'three_way', got '" + k + "'");
  }

  std::vector<std::string> covariates;
  if (root.contains("covariates")) covariates = as_strings(root["covariates"], "covariates");
  std::vector<std::string> intercepts;
  if (root.contains("intercepts")) intercepts = as_strings(root["intercepts"], "intercepts");

  ModelStructure structure{kind,          std::move(genetic),   std::move(env1), std::move(env2),
                           std::move(covariates), std::move(intercepts), family};
  structure.validate();

  Candidates candidates;
  if (root.contains("candidates")) {
    const json& c = root["candidates"];
    if (!c.is_object()) throw UsageError("candidates must be an object");
    reject_unknown(c, {"genetic", "env1", "env2", "covariates"}, "candidates");
    const std::pair<const char*, ScoreRole> roles[] = {
        {"genetic", ScoreRole::Genetic}, {"env1", ScoreRole::Env1}, {"env2", ScoreRole::Env2}};
    for (const auto& [key, role] : roles) {
      if (!c.contains(key)) continue;
      if (role == ScoreRole::Env2 && !structure.env2) {
        throw UsageError("candidates.env2 given for a two-way model");
      }
      candidates.elements[role] = as_elements(c[key], std::string("candidates.") + key);
    }
    if (c.contains("covariates")) {
      candidates.covariates = as_strings(c["covariates"], "candidates.covariates");
    }
  }
  return {outcome, subject, std::move(structure), std::move(candidates)};
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open model config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model_config(buffer.str());
}

}  // namespace gxe
