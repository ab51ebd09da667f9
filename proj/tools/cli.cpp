#include "cli.hpp"

#include "report.hpp"

#include "gxe/errors.hpp"
#include "gxe/log.hpp"
#include "gxe/model_config.hpp"
#include "gxe/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

namespace gxe::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 20170831;

struct Common {
  std::string data;
  std::string model;
  std::string out;
  std::string sep = ",";
  double delta = 1e-4;
  int max_iter = 100;
  int restarts = 0;
  std::uint64_t seed = kDefaultSeed;
  int threads = default_thread_count();
  bool no_timestamp = false;
  bool json_stdout = false;
  // cv / stepwise / outliers
  std::string folds = "loo";
  std::string direction = "forward";
  std::string criterion = "bic";
  bool interactive = false;
  double threshold = 2.8;
  std::string clean;
  // simulate
  int example = 1;
  int n = 1000;
  int n_val = 100;
  std::string effect = "medium";
  std::string start = "equal";
  std::string genes = "binomial";
  int reps = 100;
  bool grid = false;
};

char parse_sep(const std::string& s) {
  if (s == "tab" || s == "\\t" || s == "\t") return '\t';
  if (s.size() != 1) throw UsageError("--sep must be a single character or 'tab'");
  return s[0];
}

FitOptions fit_options(const Common& c) {
  if (!(c.delta > 0)) throw UsageError("--delta must be positive");
  if (c.max_iter < 1) throw UsageError("--max-iter must be at least 1");
  if (c.restarts < 0) throw UsageError("--restarts must be non-negative");
  FitOptions o;
  o.delta = c.delta;
  o.max_iterations = c.max_iter;
  o.restarts = c.restarts;
  o.seed = c.seed;
  return o;
}

struct Loaded {
  ModelConfig config;
  Dataset data;
};

Loaded load(const Common& c) {
  ModelConfig config = load_model_config(c.model);
  Dataset data = load_dataset(c.data, config.load_options(parse_sep(c.sep)));
  config.structure.validate(data);
  return {std::move(config), std::move(data)};
}

void emit(const Common& c, const report::json& doc, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (c.json_stdout) out << text;
  if (!c.out.empty()) {
    std::ofstream f(c.out);
    if (!f) throw UsageError("cannot write report to '" + c.out + "'");
    f << text;
  }
}

void print_banner(const Common& c, const std::string& command, std::ostream& out) {
  if (c.json_stdout) return;
  if (!c.no_timestamp) {
    out << "# " << command << " " << report::header(command, true)["generated_at"].get<std::string>()
        << "\n";
  }
}

void write_csv(const Dataset& data, const std::vector<Index>& rows, const std::string& path,
               char sep) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write '" + path + "'");
  const auto names = data.column_names();
  for (std::size_t k = 0; k < names.size(); ++k) f << (k ? std::string(1, sep) : "") << names[k];
  f << "\n" << std::setprecision(17);
  for (Index i : rows) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (k) f << sep;
      f << data.column(names[k])(i);
    }
    f << "\n";
  }
}

// -------------------------------------------------------------------------
// Commands
// -------------------------------------------------------------------------

int cmd_fit(const Common& c, std::ostream& out, std::ostream& err) {
  const Loaded in = load(c);
  const LegitFit fit = canonicalize(fit_alternating(in.config.structure, in.data, fit_options(c)));
  auto doc = report::header("fit", !c.no_timestamp);
  doc["data"] = report::data_summary(in.data, c.data);
  doc["fit"] = report::fit_json(fit);
  emit(c, doc, out);
  if (!c.json_stdout) {
    print_banner(c, "fit", out);
    report::print_fit(out, fit);
  }
  if (!fit.converged) {
    err << "error: alternating optimization did not converge within " << c.max_iter
        << " iterations\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_cv(const Common& c, std::ostream& out, std::ostream& err) {
  const Loaded in = load(c);
  const CvScheme scheme = CvScheme::parse(c.folds);
  const CvResult cv =
      cross_validate(in.config.structure, in.data, scheme, c.seed, fit_options(c), c.threads);
  auto doc = report::header("cv", !c.no_timestamp);
  doc["data"] = report::data_summary(in.data, c.data);
  doc["cv"] = report::cv_json(cv, scheme, c.seed);
  emit(c, doc, out);
  if (!c.json_stdout) {
    print_banner(c, "cv", out);
    report::print_cv(out, cv, scheme);
  }
  if (cv.partial) {
    err << "error: some cross-validation folds failed; result is partial\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_stepwise(const Common& c, std::istream& in_stream, std::ostream& out) {
  const Loaded in = load(c);
  StepwiseOptions o;
  o.direction = parse_direction(c.direction);
  o.criterion = parse_criterion(c.criterion);
  o.cv = CvScheme::parse(c.folds);
  o.seed = c.seed;
  o.fit = fit_options(c);
  o.threads = c.threads;
  o.interactive = c.interactive;
  o.in = &in_stream;
  o.out = &out;
  const StepwiseTrace trace = stepwise_search(in.config.structure, in.data, in.config.candidates, o);
  auto doc = report::header("stepwise", !c.no_timestamp);
  doc["data"] = report::data_summary(in.data, c.data);
  doc["stepwise"] = report::stepwise_json(trace, o);
  emit(c, doc, out);
  if (!c.json_stdout) {
    print_banner(c, "stepwise", out);
    report::print_stepwise(out, trace, o);
  }
  return kExitOk;
}

int cmd_outliers(const Common& c, std::ostream& out) {
  const Loaded in = load(c);
  const OutlierReport rep =
      detect_outliers(in.config.structure, in.data, c.threshold, fit_options(c), c.threads);
  auto doc = report::header("outliers", !c.no_timestamp);
  doc["data"] = report::data_summary(in.data, c.data);
  doc["outliers"] = report::outliers_json(rep);
  if (!c.clean.empty()) {
    std::vector<Index> keep;
    std::size_t next = 0;
    for (Index i = 0; i < in.data.rows(); ++i) {
      if (next < rep.flagged.size() && rep.flagged[next].row == i) {
        ++next;
        continue;
      }
      keep.push_back(i);
    }
    write_csv(in.data, keep, c.clean, parse_sep(c.sep));
    doc["outliers"]["clean_data"] = c.clean;
  }
  emit(c, doc, out);
  if (!c.json_stdout) {
    print_banner(c, "outliers", out);
    report::print_outliers(out, rep);
    if (!c.clean.empty()) out << "data without flagged rows written to " << c.clean << "\n";
  }
  return kExitOk;
}

int cmd_simulate(const Common& c, std::ostream& out) {
  std::vector<Scenario> scenarios;
  if (c.grid) {
    scenarios = reference_grid(c.reps, c.seed);
  } else {
    Scenario s;
    s.example = c.example;
    s.n_train = c.n;
    s.reps = c.reps;
    s.seed = c.seed;
    if (c.effect == "medium") s.effect = Effect::Medium;
    else if (c.effect == "small") s.effect = Effect::Small;
    else throw UsageError("--effect must be medium or small");
    if (c.start == "equal") s.start = StartKind::Equal;
    else if (c.start == "true") s.start = StartKind::True;
    else throw UsageError("--start must be equal or true");
    scenarios.push_back(s);
  }
  GeneDistribution genes = GeneDistribution::Binomial;
  if (c.genes == "gaussian") genes = GeneDistribution::GaussianMatched;
  else if (c.genes != "binomial") throw UsageError("--genes must be binomial or gaussian");

  auto doc = report::header("simulate", !c.no_timestamp);
  doc["scenarios"] = report::json::array();
  if (!c.json_stdout) {
    print_banner(c, "simulate", out);
    report::print_simulation_header(out);
  }
  for (Scenario& s : scenarios) {
    s.genes = genes;
    s.n_val = c.n_val;
    s.fit = fit_options(c);
    const SimulationReport r = run_study(s, c.threads);
    doc["scenarios"].push_back(report::simulation_json(r));
    if (!c.json_stdout) report::print_simulation_row(out, r);
  }
  emit(c, doc, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gene-by-environment interaction models with latent weighted scores"};
  app.require_subcommand(1);
  Common c;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--data", c.data, "Delimited data file with a header row")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--model", c.model, "JSON model config")->required()->check(CLI::ExistingFile);
    sub->add_option("--sep", c.sep, "Field separator (a character or 'tab')");
  };
  auto add_fit = [&](CLI::App* sub) {
    sub->add_option("--delta", c.delta, "Convergence threshold on weight changes");
    sub->add_option("--max-iter", c.max_iter, "Maximum alternating iterations");
    sub->add_option("--restarts", c.restarts, "Extra runs from random-sign starts");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", c.out, "Write the JSON report here");
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-timestamp", c.no_timestamp, "Omit the timestamp line");
    sub->add_flag("--json", c.json_stdout, "Print the JSON report instead of tables");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit a model by alternating optimization");
  add_model(fit);
  add_fit(fit);
  add_common(fit);

  CLI::App* cv = app.add_subcommand("cv", "Cross-validated R^2 (subject-grouped)");
  add_model(cv);
  add_fit(cv);
  add_common(cv);
  cv->add_option("--folds", c.folds, "'loo' or the number of folds");

  CLI::App* step = app.add_subcommand("stepwise", "Stepwise search over candidate elements");
  add_model(step);
  add_fit(step);
  add_common(step);
  step->add_option("--direction", c.direction, "forward, backward or bidirectional");
  step->add_option("--criterion", c.criterion, "aic, bic, cv_r2 or cv_auc");
  step->add_option("--folds", c.folds, "Folds for cv criteria: 'loo' or a number");
  step->add_flag("--interactive", c.interactive, "Choose each move at the terminal");

  CLI::App* outl = app.add_subcommand("outliers", "Flag rows by standardized LOOCV residuals");
  add_model(outl);
  add_fit(outl);
  add_common(outl);
  outl->add_option("--threshold", c.threshold, "Flag |z| above this (2.8 or 2.5)");
  outl->add_option("--clean", c.clean, "Write the data without flagged rows here");

  CLI::App* sim = app.add_subcommand("simulate", "Run the simulation study");
  add_fit(sim);
  add_common(sim);
  sim->add_option("--example", c.example, "1 (two-way) or 2 (three-way)");
  sim->add_option("--n", c.n, "Training sample size");
  sim->add_option("--n-val", c.n_val, "Validation sample size");
  sim->add_option("--effect", c.effect, "medium or small");
  sim->add_option("--start", c.start, "equal or true starting weights");
  sim->add_option("--genes", c.genes, "binomial or gaussian (matched moments)");
  sim->add_option("--reps", c.reps, "Replicates per scenario");
  sim->add_flag("--grid", c.grid, "Run all 24 reference cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto previous = set_warning_handler([&err](const std::string& m) { err << "warning: " << m << "\n"; });
  int code = kExitOk;
  try {
    if (*fit) code = cmd_fit(c, out, err);
    else if (*cv) code = cmd_cv(c, out, err);
    else if (*step) code = cmd_stepwise(c, in, out);
    else if (*outl) code = cmd_outliers(c, out);
    else if (*sim) code = cmd_simulate(c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  }
  set_warning_handler(std::move(previous));
  return code;
}

}  // namespace gxe::cli
