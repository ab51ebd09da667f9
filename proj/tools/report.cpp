#include "report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

namespace gxe::report {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string action_name(StepRecord::Action a) {
  return a == StepRecord::Action::Add ? "add" : "drop";
}

}  // namespace

double percent(double weight) { return std::abs(weight) * 100.0; }

json header(const std::string& command, bool timestamp) {
  json j;
  j["schema"] = kSchema;
  j["command"] = command;
  if (timestamp) j["generated_at"] = utc_now();
  return j;
}

json data_summary(const Dataset& data, const std::string& path) {
  return {{"path", path},
          {"rows", data.rows()},
          {"subjects", data.subject_count()},
          {"dropped_rows", data.dropped_rows()},
          {"outcome", data.outcome_name()}};
}

// -------------------------------------------------------------------------
// Fit
// -------------------------------------------------------------------------

json fit_json(const LegitFit& fit) {
  json j;
  j["kind"] = to_string(fit.structure.kind);
  j["family"] = to_string(fit.structure.family);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["monotone"] = fit.monotone;
  j["objective"] = fit.objective();
  j["loglik"] = fit.loglik;
  j["aic"] = fit.aic;
  j["bic"] = fit.bic;
  j["parameter_count"] = fit.parameter_count;
  j["n"] = fit.n_obs;
  j["r2"] = fit.r2;
  j["scale"] = fit.scale;

  json coefs = json::array();
  for (Index c = 0; c < fit.layout.size(); ++c) {
    coefs.push_back({{"name", fit.layout.names[static_cast<std::size_t>(c)]},
                     {"estimate", fit.coefficients(c)},
                     {"se", fit.coefficient_se(c)}});
  }
  j["coefficients"] = coefs;

  json scores = json::array();
  for (ScoreRole role : fit.structure.roles()) {
    const ScoreSpec& spec = fit.structure.score(role);
    json elements = json::array();
    const auto se = fit.weight_se.find(role);
    for (Index k = 0; k < spec.size(); ++k) {
      json e{{"element", spec.elements()[static_cast<std::size_t>(k)].label()},
             {"weight", spec.weights()(k)},
             {"percent", percent(spec.weights()(k))}};
      e["se"] = se != fit.weight_se.end() ? json(se->second(k)) : json(nullptr);
      elements.push_back(e);
    }
    const auto flipped = fit.flipped.find(role);
    scores.push_back({{"role", to_string(role)},
                      {"name", spec.name()},
                      {"fixed", spec.fixed()},
                      {"flipped", flipped != fit.flipped.end() && flipped->second},
                      {"elements", elements}});
  }
  j["scores"] = scores;
  j["objective_trace"] = fit.objective_trace;
  return j;
}

void print_fit(std::ostream& out, const LegitFit& fit) {
  out << to_string(fit.structure.kind) << " model, " << to_string(fit.structure.family)
      << " family, n = " << fit.n_obs << "\n";
  out << (fit.converged ? "converged" : "NOT converged") << " after " << fit.iterations
      << " iterations";
  if (!fit.monotone) out << " (objective trace not monotone)";
  out << "\n\n";

  out << std::left << std::setw(24) << "coefficient" << std::right << std::setw(14) << "estimate"
      << std::setw(14) << "se" << "\n";
  for (Index c = 0; c < fit.layout.size(); ++c) {
    out << std::left << std::setw(24) << fit.layout.names[static_cast<std::size_t>(c)]
        << std::right << std::fixed << std::setprecision(5) << std::setw(14)
        << fit.coefficients(c) << std::setw(14) << fit.coefficient_se(c) << "\n";
  }
  for (ScoreRole role : fit.structure.roles()) {
    const ScoreSpec& spec = fit.structure.score(role);
    out << "\nscore " << spec.name() << " (" << to_string(role) << (spec.fixed() ? ", fixed" : "")
        << ")\n";
    out << std::left << std::setw(24) << "element" << std::right << std::setw(14) << "weight"
        << std::setw(14) << "se" << std::setw(8) << "%" << "\n";
    const auto se = fit.weight_se.find(role);
    for (Index k = 0; k < spec.size(); ++k) {
      out << std::left << std::setw(24) << spec.elements()[static_cast<std::size_t>(k)].label()
          << std::right << std::setw(14) << std::setprecision(5) << spec.weights()(k);
      if (se != fit.weight_se.end()) {
        out << std::setw(14) << se->second(k);
      } else {
        out << std::setw(14) << "-";
      }
      out << std::setw(7) << std::setprecision(0) << percent(spec.weights()(k)) << "%\n";
    }
  }
  out << std::setprecision(4) << "\nR^2 " << fit.r2 << "   AIC " << fit.aic << "   BIC " << fit.bic
      << "   parameters " << fit.parameter_count << "\n";
  out << "objective trace:";
  out << std::setprecision(6);
  for (double v : fit.objective_trace) out << " " << v;
  out << std::defaultfloat << "\n";
}

// -------------------------------------------------------------------------
// Cross-validation, stepwise, outliers
// -------------------------------------------------------------------------

json cv_json(const CvResult& cv, const CvScheme& scheme, std::uint64_t seed) {
  json folds = json::array();
  for (const auto& f : cv.folds) {
    json jf{{"fold", f.fold}, {"ok", f.ok}};
    if (f.ok) {
      jf["converged"] = f.converged;
      jf["iterations"] = f.iterations;
      jf["objective"] = f.objective;
    } else {
      jf["error"] = f.error;
    }
    folds.push_back(jf);
  }
  json j{{"scheme", scheme.label()},
         {"seed", seed},
         {"r2", cv.r2},
         {"partial", cv.partial},
         {"fold_of_subject", cv.fold_of_subject},
         {"folds", folds}};
  std::vector<double> p(cv.predictions.data(), cv.predictions.data() + cv.predictions.size());
  j["predictions"] = p;
  if (cv.auc) j["auc"] = *cv.auc;
  return j;
}

void print_cv(std::ostream& out, const CvResult& cv, const CvScheme& scheme) {
  int failed = 0;
  for (const auto& f : cv.folds) failed += f.ok ? 0 : 1;
  out << "cross-validation (" << scheme.label() << ", " << cv.folds.size() << " folds)\n";
  out << std::fixed << std::setprecision(4) << "R^2 " << cv.r2;
  if (cv.auc) out << "   AUC " << *cv.auc;
  out << std::defaultfloat << "\n";
  if (cv.partial) out << "partial result: " << failed << " fold(s) failed\n";
  for (const auto& f : cv.folds) {
    if (!f.ok) out << "  fold " << f.fold << ": " << f.error << "\n";
  }
}

json stepwise_json(const StepwiseTrace& trace, const StepwiseOptions& options) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"action", action_name(s.action)},
                     {"target", s.target},
                     {"element", s.element},
                     {"criterion_before", s.criterion_before},
                     {"criterion_after", s.criterion_after}});
  }
  json scores = json::array();
  for (ScoreRole role : trace.final_structure.roles()) {
    const ScoreSpec& spec = trace.final_structure.score(role);
    std::vector<std::string> labels;
    for (const auto& e : spec.elements()) labels.push_back(e.label());
    scores.push_back({{"role", to_string(role)}, {"name", spec.name()}, {"elements", labels}});
  }
  return {{"direction", to_string(options.direction)},
          {"criterion", to_string(options.criterion)},
          {"steps", steps},
          {"final_criterion", trace.final_criterion},
          {"final_scores", scores},
          {"final_covariates", trace.final_structure.covariates},
          {"advisories", trace.advisories}};
}

void print_stepwise(std::ostream& out, const StepwiseTrace& trace, const StepwiseOptions& options) {
  out << to_string(options.direction) << " search on " << to_string(options.criterion) << "\n";
  if (trace.steps.empty()) out << "no move improved the starting model\n";
  int n = 1;
  for (const auto& s : trace.steps) {
    out << std::setw(3) << n++ << "  " << std::left << std::setw(5) << action_name(s.action)
        << std::setw(16) << s.element << std::setw(12) << s.target << std::right << std::fixed
        << std::setprecision(4) << std::setw(14) << s.criterion_before << " -> " << std::setw(14)
        << s.criterion_after << std::defaultfloat << "\n";
  }
  out << "final model:\n";
  for (ScoreRole role : trace.final_structure.roles()) {
    const ScoreSpec& spec = trace.final_structure.score(role);
    out << "  " << spec.name() << ":";
    for (const auto& e : spec.elements()) out << " " << e.label();
    out << "\n";
  }
  if (!trace.final_structure.covariates.empty()) {
    out << "  covariates:";
    for (const auto& c : trace.final_structure.covariates) out << " " << c;
    out << "\n";
  }
  for (const auto& a : trace.advisories) out << "advisory: " << a << "\n";
}

json outliers_json(const OutlierReport& report) {
  json flagged = json::array();
  for (const auto& r : report.flagged) {
    flagged.push_back({{"row", r.row},
                       {"subject", r.subject},
                       {"outcome", r.outcome},
                       {"prediction", r.prediction},
                       {"residual", r.residual},
                       {"z", r.z}});
  }
  return {{"threshold", report.threshold},
          {"residual_sd", report.residual_sd},
          {"cv_r2", report.cv.r2},
          {"flagged", flagged}};
}

void print_outliers(std::ostream& out, const OutlierReport& report) {
  out << "standardized leave-one-out residuals, threshold " << report.threshold << "\n";
  out << report.flagged.size() << " row(s) flagged\n";
  if (report.flagged.empty()) return;
  out << std::setw(8) << "row" << std::setw(14) << "outcome" << std::setw(14) << "prediction"
      << std::setw(10) << "z" << "\n";
  for (const auto& r : report.flagged) {
    // Rows are reported 1-based, as in the data file body.
    out << std::setw(8) << (r.row + 1) << std::fixed << std::setprecision(4) << std::setw(14)
        << r.outcome << std::setw(14) << r.prediction << std::setprecision(2) << std::setw(10)
        << r.z << std::defaultfloat << "\n";
  }
}

// -------------------------------------------------------------------------
// Simulation
// -------------------------------------------------------------------------

json simulation_json(const SimulationReport& report) {
  const Scenario& s = report.scenario;
  json reps = json::array();
  for (const auto& r : report.reps) {
    json jr{{"rep", r.rep}, {"ok", r.ok}};
    if (r.ok) {
      jr["converged"] = r.converged;
      jr["iterations"] = r.iterations;
      jr["r2_val"] = r.r2_val;
      jr["r2_max"] = r.r2_max;
      jr["ratio"] = r.ratio;
      jr["genes_cov"] = r.cov.genes;
      jr["env_cov"] = r.cov.env;
      jr["main_cov"] = r.cov.main;
    } else {
      jr["error"] = r.error;
    }
    reps.push_back(jr);
  }
  return {{"scenario",
           {{"example", s.example},
            {"n_train", s.n_train},
            {"n_val", s.n_val},
            {"effect", to_string(s.effect)},
            {"start", to_string(s.start)},
            {"genes", to_string(s.genes)},
            {"reps", s.reps},
            {"seed", s.seed},
            {"noise_sd", s.effective_noise_sd()}}},
          {"ratio_mean", report.ratio_mean},
          {"ratio_of_means", report.ratio_of_means},
          {"genes_cov", report.genes_cov},
          {"env_cov", report.env_cov},
          {"main_cov", report.main_cov},
          {"used", report.used},
          {"excluded", report.excluded},
          {"per_rep", reps}};
}

void print_simulation_header(std::ostream& out) {
  out << "ex      N  effect  start  genes     ratio  genes_cov  env_cov  main_cov  used\n";
}

void print_simulation_row(std::ostream& out, const SimulationReport& r) {
  const Scenario& s = r.scenario;
  out << std::setw(2) << s.example << std::setw(7) << s.n_train << "  " << std::left
      << std::setw(7) << to_string(s.effect) << std::setw(6) << to_string(s.start) << " "
      << std::setw(8) << (s.genes == GeneDistribution::Binomial ? "binom" : "gauss") << std::right
      << std::fixed << std::setprecision(3) << std::setw(7) << r.ratio_mean << std::setw(11)
      << r.genes_cov << std::setw(9) << r.env_cov << std::setw(10) << r.main_cov
      << std::defaultfloat << std::setw(6) << r.used << "\n";
}

}  // namespace gxe::report
