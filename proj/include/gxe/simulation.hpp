#pragma once

#include "gxe/alternating.hpp"
#include "gxe/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gxe {

enum class Effect { Medium, Small };
enum class StartKind { Equal, True };
enum class GeneDistribution { Binomial, GaussianMatched };

std::string to_string(Effect effect);
std::string to_string(StartKind start);
std::string to_string(GeneDistribution genes);

/// One cell of the simulation grid.
struct Scenario {
  int example = 1;
  int n_train = 1000;
  int n_val = 100;
  Effect effect = Effect::Medium;
  StartKind start = StartKind::Equal;
  int reps = 100;
  std::uint64_t seed = 20170831;
  GeneDistribution genes = GeneDistribution::Binomial;
  /// Replaces the effect-size noise SD (0 gives noiseless data).
  std::optional<double> noise_sd;
  FitOptions fit;

  /// Throws UsageError on an unknown example or non-positive sizes.
  void validate() const;
  /// Noise SD in effect: the override or the reference value for the cell.
  double effective_noise_sd() const;
};

/// Generating parameters of one example.
struct Truth {
  int example = 1;
  /// Model with the true weights (g1..g4, g1*g3, g2*g3; e1..e3; z).
  ModelStructure structure;
  /// True main coefficients, in CoefficientLayout order of `structure`.
  VectorXd coefficients;
  double noise_sd = 0.0;
};

struct SimulatedExample {
  Dataset train;
  Dataset validation;
  Truth truth;
};

/// Noise SD giving R^2 = .30 (medium) or .15 (small).
double reference_noise_sd(int example, Effect effect);

/// The model fitted in the study, with equal or true starting weights.
ModelStructure study_structure(int example, StartKind start);

/// Draws a training and a validation sample. Deterministic in rep_seed.
SimulatedExample generate_example(const Scenario& scenario, std::uint64_t rep_seed);

/// Mean of the outcome under the true generating model, evaluated directly
/// from the generating formula.
VectorXd true_mean(const Dataset& data, const Truth& truth);

/// R^2 of the true mean function on a sample, centered on the sample mean.
double r2_max(const Dataset& validation, const Truth& truth);

/// Seed of replicate `rep`, derived from the scenario seed.
std::uint64_t rep_seed(std::uint64_t scenario_seed, int rep);

struct CoverageResult {
  double genes = 0.0;
  double env = 0.0;
  double main = 0.0;
  /// Score roles flipped in the truth parameterization that scored best.
  std::vector<ScoreRole> parameterization;
};

/// 95% Wald coverage of the genetic weights, the first environmental
/// score's weights and the main coefficients, against the sign
/// parameterization of the truth with the highest average coverage.
CoverageResult coverage(const LegitFit& fit, const Truth& truth, double z = 1.96);

struct RepRecord {
  int rep = 0;
  bool ok = false;
  std::string error;
  bool converged = false;
  int iterations = 0;
  double r2_val = 0.0;
  double r2_max = 0.0;
  double ratio = 0.0;
  CoverageResult cov;
};

struct SimulationReport {
  Scenario scenario;
  double ratio_mean = 0.0;
  /// mean(R2_val) / mean(R2_max): a less noisy summary, reported alongside.
  double ratio_of_means = 0.0;
  double genes_cov = 0.0;
  double env_cov = 0.0;
  double main_cov = 0.0;
  /// Replicates entering the averages.
  int used = 0;
  /// Replicates excluded: fit errors or non-convergence.
  int excluded = 0;
  std::vector<RepRecord> reps;
};

/// Runs every replicate (concurrently, up to `threads`) and averages the
/// ratio R2_val / R2_max and the three coverages over converged replicates.
SimulationReport run_study(const Scenario& scenario, int threads = 1);

/// The 24 reference cells: example x n_train x effect x start.
std::vector<Scenario> reference_grid(int reps, std::uint64_t seed);

}  // namespace gxe
