#include "gxe/simulation.hpp"

#include "gxe/errors.hpp"
#include "gxe/parallel.hpp"

#include <cmath>
#include <random>

namespace gxe {

namespace {

const std::vector<std::string> kGenes = {"g1", "g2", "g3", "g4"};
const std::vector<std::string> kEnvs = {"e1", "e2", "e3"};

std::vector<ScoreElement> genetic_elements() {
  return {{"g1"}, {"g2"}, {"g3"}, {"g4"}, {"g1", "g3"}, {"g2", "g3"}};
}

VectorXd true_genetic_weights() {
  VectorXd w(6);
  w << .2, .15, -.3, .1, .05, .2;
  return w;
}

VectorXd true_env_weights() {
  VectorXd w(3);
  w << -.45, .35, .2;
  return w;
}

constexpr double kGeneP = 0.30;
constexpr double kEnvSd = 1.5;
constexpr double kZMean = 3.0;
constexpr double kZSd = 1.0;

Dataset draw_sample(int rows, int example, GeneDistribution genes, double noise_sd,
                    const Truth& truth, std::mt19937_64& rng) {
  std::bernoulli_distribution gene(kGeneP);
  std::normal_distribution<double> gene_matched(kGeneP, std::sqrt(kGeneP * (1.0 - kGeneP)));
  std::normal_distribution<double> env(0.0, kEnvSd);
  std::normal_distribution<double> zdist(kZMean, kZSd);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::map<std::string, VectorXd> columns;
  for (const auto& name : kGenes) columns[name].resize(rows);
  for (const auto& name : kEnvs) columns[name].resize(rows);
  if (example == 2) columns["z"].resize(rows);
  columns["y"] = VectorXd::Zero(rows);
  VectorXd eps(rows);

  for (int i = 0; i < rows; ++i) {
    for (const auto& name : kGenes) {
      columns[name](i) = genes == GeneDistribution::Binomial ? (gene(rng) ? 1.0 : 0.0)
                                                             : gene_matched(rng);
    }
    for (const auto& name : kEnvs) columns[name](i) = env(rng);
    if (example == 2) columns["z"](i) = zdist(rng);
    eps(i) = noise_sd * noise(rng);
  }
  Dataset data(std::move(columns), "y");
  VectorXd y = true_mean(data, truth) + eps;
  return data.with_column("y", std::move(y));
}

}  // namespace

std::string to_string(Effect effect) { return effect == Effect::Medium ? "medium" : "small"; }
std::string to_string(StartKind start) { return start == StartKind::Equal ? "equal" : "true"; }
std::string to_string(GeneDistribution genes) {
  return genes == GeneDistribution::Binomial ? "binomial" : "gaussian_matched";
}

double reference_noise_sd(int example, Effect effect) {
  if (example == 1) return effect == Effect::Medium ? 4.36 : 6.78;
  if (example == 2) return effect == Effect::Medium ? 12.31 : 19.19;
  throw UsageError("unknown example " + std::to_string(example) + " (expected 1 or 2)");
}

void Scenario::validate() const {
  if (example != 1 && example != 2) {
    throw UsageError("unknown example " + std::to_string(example) + " (expected 1 or 2)");
  }
  if (n_train < 20 || n_val < 2) throw UsageError("sample sizes too small");
  if (reps < 1) throw UsageError("reps must be at least 1");
  if (noise_sd && *noise_sd < 0) throw UsageError("noise SD must be non-negative");
}

double Scenario::effective_noise_sd() const {
  return noise_sd ? *noise_sd : reference_noise_sd(example, effect);
}

ModelStructure study_structure(int example, StartKind start) {
  std::optional<VectorXd> gw, ew;
  if (start == StartKind::True) {
    gw = true_genetic_weights();
    ew = true_env_weights();
  }
  ScoreSpec genetic("G", genetic_elements(), gw);
  ScoreSpec env("E", {{"e1"}, {"e2"}, {"e3"}}, ew);
  if (example == 1) return ModelStructure::two_way(genetic, env);
  if (example == 2) {
    ScoreSpec z("Z", {{"z"}}, VectorXd::Ones(1), true);
    return ModelStructure::three_way(genetic, env, z);
  }
  throw UsageError("unknown example " + std::to_string(example));
}

VectorXd true_mean(const Dataset& data, const Truth& truth) {
  const VectorXd gw = truth.structure.genetic.weights();
  const VectorXd ew = truth.structure.env1.weights();
  const auto& g1 = data.column("g1").array();
  const auto& g2 = data.column("g2").array();
  const auto& g3 = data.column("g3").array();
  const auto& g4 = data.column("g4").array();
  const Eigen::ArrayXd g = gw(0) * g1 + gw(1) * g2 + gw(2) * g3 + gw(3) * g4 +
                           gw(4) * g1 * g3 + gw(5) * g2 * g3;
  const Eigen::ArrayXd e = ew(0) * data.column("e1").array() + ew(1) * data.column("e2").array() +
                           ew(2) * data.column("e3").array();
  const VectorXd& b = truth.coefficients;
  if (truth.example == 1) {
    // (Intercept), E, G, E:G
    return (b(0) + b(1) * e + b(2) * g + b(3) * e * g).matrix();
  }
  // (Intercept), E, Z, G, E:Z, E:G, Z:G, E:Z:G
  const Eigen::ArrayXd z = truth.structure.env2->weights()(0) * data.column("z").array();
  return (b(0) + b(1) * e + b(2) * z + b(3) * g + b(4) * e * z + b(5) * e * g + b(6) * z * g +
          b(7) * e * z * g)
      .matrix();
}

double r2_max(const Dataset& validation, const Truth& truth) {
  const VectorXd& y = validation.outcome();
  const double tss = (y.array() - y.mean()).square().sum();
  return 1.0 - (y - true_mean(validation, truth)).squaredNorm() / tss;
}

std::uint64_t rep_seed(std::uint64_t scenario_seed, int rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(scenario_seed),
                    static_cast<std::uint32_t>(scenario_seed >> 32),
                    static_cast<std::uint32_t>(rep)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SimulatedExample generate_example(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  VectorXd coefficients;
  if (scenario.example == 1) {
    coefficients.resize(4);
    coefficients << 5, 3, 2, 4;
  } else {
    coefficients.resize(8);
    coefficients << 5, 3, 1, 2, 1.5, 5, 2, 2;
  }
  Truth truth{scenario.example, study_structure(scenario.example, StartKind::True),
              std::move(coefficients), scenario.effective_noise_sd()};

  std::mt19937_64 rng(seed);
  Dataset train = draw_sample(scenario.n_train, scenario.example, scenario.genes,
                              truth.noise_sd, truth, rng);
  Dataset validation = draw_sample(scenario.n_val, scenario.example, scenario.genes,
                                   truth.noise_sd, truth, rng);
  return {std::move(train), std::move(validation), std::move(truth)};
}

CoverageResult coverage(const LegitFit& fit, const Truth& truth, double z) {
  std::vector<ScoreRole> flippable;
  for (ScoreRole role : fit.structure.roles()) {
    if (!fit.structure.score(role).fixed()) flippable.push_back(role);
  }

  auto covered = [z](const VectorXd& est, const VectorXd& se, const VectorXd& target) {
    int hits = 0;
    for (Index i = 0; i < est.size(); ++i) {
      if (std::abs(est(i) - target(i)) <= z * se(i)) ++hits;
    }
    return hits;
  };

  CoverageResult best;
  double best_average = -1.0;
  const std::size_t variants = std::size_t{1} << flippable.size();
  for (std::size_t mask = 0; mask < variants; ++mask) {
    std::vector<ScoreRole> flips;
    for (std::size_t b = 0; b < flippable.size(); ++b) {
      if (mask & (std::size_t{1} << b)) flips.push_back(flippable[b]);
    }
    auto is_flipped = [&](ScoreRole r) {
      return std::find(flips.begin(), flips.end(), r) != flips.end();
    };
    VectorXd gw = truth.structure.genetic.weights();
    VectorXd ew = truth.structure.env1.weights();
    if (is_flipped(ScoreRole::Genetic)) gw = -gw;
    if (is_flipped(ScoreRole::Env1)) ew = -ew;
    VectorXd beta = truth.coefficients;
    for (Index c = 0; c < fit.layout.size(); ++c) {
      int odd = 0;
      for (ScoreRole r : flips) odd += fit.layout.contains(c, r) ? 1 : 0;
      if (odd % 2) beta(c) = -beta(c);
    }

    const int g_hits = covered(fit.weights(ScoreRole::Genetic), fit.weight_se.at(ScoreRole::Genetic), gw);
    const int e_hits = covered(fit.weights(ScoreRole::Env1), fit.weight_se.at(ScoreRole::Env1), ew);
    const Index main_count = fit.layout.intercept_count + fit.layout.term_count;
    const int m_hits = covered(fit.coefficients.head(main_count), fit.coefficient_se.head(main_count),
                               beta.head(main_count));
    const double total = static_cast<double>(gw.size() + ew.size() + main_count);
    const double average = (g_hits + e_hits + m_hits) / total;
    if (average > best_average) {
      best_average = average;
      best.genes = static_cast<double>(g_hits) / static_cast<double>(gw.size());
      best.env = static_cast<double>(e_hits) / static_cast<double>(ew.size());
      best.main = static_cast<double>(m_hits) / static_cast<double>(main_count);
      best.parameterization = flips;
    }
  }
  return best;
}

SimulationReport run_study(const Scenario& scenario, int threads) {
  scenario.validate();
  SimulationReport report;
  report.scenario = scenario;
  report.reps.resize(static_cast<std::size_t>(scenario.reps));
  const ModelStructure structure = study_structure(scenario.example, scenario.start);

  parallel_for(report.reps.size(), threads, [&](std::size_t i) {
    RepRecord& rec = report.reps[i];
    rec.rep = static_cast<int>(i);
    try {
      const SimulatedExample ex = generate_example(scenario, rep_seed(scenario.seed, rec.rep));
      const LegitFit fit = fit_alternating(structure, ex.train, scenario.fit);
      rec.converged = fit.converged;
      rec.iterations = fit.iterations;
      const VectorXd& y = ex.validation.outcome();
      const double tss = (y.array() - y.mean()).square().sum();
      rec.r2_val = 1.0 - (y - predict(fit, ex.validation)).squaredNorm() / tss;
      rec.r2_max = r2_max(ex.validation, ex.truth);
      rec.ratio = rec.r2_val / rec.r2_max;
      rec.cov = coverage(fit, ex.truth);
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });

  double ratio = 0, genes = 0, env = 0, main = 0, r2_val = 0, r2_max_sum = 0;
  for (const auto& rec : report.reps) {
    if (!rec.ok || !rec.converged) {
      ++report.excluded;
      continue;
    }
    ++report.used;
    ratio += rec.ratio;
    r2_val += rec.r2_val;
    r2_max_sum += rec.r2_max;
    genes += rec.cov.genes;
    env += rec.cov.env;
    main += rec.cov.main;
  }
  if (report.used > 0) {
    const double n = report.used;
    report.ratio_mean = ratio / n;
    report.ratio_of_means = r2_val / r2_max_sum;
    report.genes_cov = genes / n;
    report.env_cov = env / n;
    report.main_cov = main / n;
  }
  return report;
}

std::vector<Scenario> reference_grid(int reps, std::uint64_t seed) {
  std::vector<Scenario> grid;
  for (int n : {250, 1000, 5000}) {
    for (int example : {1, 2}) {
      for (Effect effect : {Effect::Medium, Effect::Small}) {
        for (StartKind start : {StartKind::Equal, StartKind::True}) {
          Scenario s;
          s.example = example;
          s.n_train = n;
          s.effect = effect;
          s.start = start;
          s.reps = reps;
          s.seed = seed;
          grid.push_back(s);
        }
      }
    }
  }
  return grid;
}

}  // namespace gxe
