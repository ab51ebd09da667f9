#pragma once

#include "gxe/alternating.hpp"
#include "gxe/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testing {

using gxe::Index;
using gxe::ScoreRole;
using gxe::VectorXd;

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// Writes `text` to a fresh file under the temp directory.
inline std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("gxe_test_" + name);
  std::ofstream(path) << text;
  return path;
}

/// A random model instance and the data it generates.
struct Instance {
  gxe::ModelStructure truth;
  VectorXd beta;
  gxe::Dataset data;
};

inline VectorXd random_l1(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  VectorXd w(n);
  for (Index j = 0; j < n; ++j) w(j) = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return w / w.lpNorm<1>();
}

/// Draws a two-way (three_way = false) or three-way model with k genetic
/// columns (0/1), s environmental columns per score, random L1 weights and
/// coefficients, then generates n rows. The outcome is computed by an
/// explicit loop over the model's terms, independent of the library.
inline Instance random_instance(std::mt19937_64& rng, bool three_way, int k, int s, int n,
                                double noise_sd, gxe::Family family = gxe::Family::Gaussian) {
  std::bernoulli_distribution gene(0.35);
  std::normal_distribution<double> env(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coef(1.0, 3.0);
  std::bernoulli_distribution sign(0.5);

  std::map<std::string, VectorXd> cols;
  std::vector<gxe::ScoreElement> ge, e1, e2;
  for (int j = 0; j < k; ++j) {
    VectorXd c(n);
    for (int i = 0; i < n; ++i) c(i) = gene(rng) ? 1.0 : 0.0;
    cols["g" + std::to_string(j + 1)] = c;
    ge.push_back({"g" + std::to_string(j + 1)});
  }
  for (int j = 0; j < s; ++j) {
    VectorXd c(n), d(n);
    for (int i = 0; i < n; ++i) c(i) = env(rng);
    for (int i = 0; i < n; ++i) d(i) = env(rng);
    cols["e" + std::to_string(j + 1)] = c;
    cols["z" + std::to_string(j + 1)] = d;
    e1.push_back({"e" + std::to_string(j + 1)});
    e2.push_back({"z" + std::to_string(j + 1)});
  }
  const VectorXd p = random_l1(rng, k), q = random_l1(rng, s), r = random_l1(rng, s);
  const int terms = three_way ? 8 : 4;
  VectorXd beta(terms);
  for (int t = 0; t < terms; ++t) beta(t) = (sign(rng) ? 1.0 : -1.0) * coef(rng);
  if (family == gxe::Family::Binomial) beta *= 0.4;

  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double G = 0, E = 0, Z = 0;
    for (int j = 0; j < k; ++j) G += p(j) * cols["g" + std::to_string(j + 1)](i);
    for (int j = 0; j < s; ++j) E += q(j) * cols["e" + std::to_string(j + 1)](i);
    for (int j = 0; j < s; ++j) Z += r(j) * cols["z" + std::to_string(j + 1)](i);
    double eta;
    if (!three_way) {
      // (Intercept), E, G, E:G
      eta = beta(0) + beta(1) * E + beta(2) * G + beta(3) * E * G;
    } else {
      // (Intercept), E, Z, G, E:Z, E:G, Z:G, E:Z:G
      eta = beta(0) + beta(1) * E + beta(2) * Z + beta(3) * G + beta(4) * E * Z +
            beta(5) * E * G + beta(6) * Z * G + beta(7) * E * Z * G;
    }
    if (family == gxe::Family::Binomial) {
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      y(i) = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < pr ? 1.0 : 0.0;
    } else {
      y(i) = eta + noise_sd * noise(rng);
    }
  }
  cols["y"] = y;

  gxe::ScoreSpec G("G", ge, p), E("E", e1, q);
  gxe::ModelStructure truth = three_way
                                  ? gxe::ModelStructure::three_way(G, E, gxe::ScoreSpec("Z", e2, r))
                                  : gxe::ModelStructure::two_way(G, E);
  truth.family = family;
  return {truth, beta, gxe::Dataset(std::move(cols), "y")};
}

/// Same model shape as `truth` with equal starting weights.
inline gxe::ModelStructure equal_start(const gxe::ModelStructure& truth) {
  gxe::ModelStructure m = truth;
  for (ScoreRole role : truth.roles()) {
    const auto& spec = truth.score(role);
    m.score(role) = gxe::ScoreSpec(spec.name(), spec.elements(), std::nullopt, spec.fixed());
  }
  return m;
}

}  // namespace testing
