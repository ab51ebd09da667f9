#include "gxe/selection.hpp"

#include "gxe/errors.hpp"
#include "gxe/log.hpp"
#include "gxe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gxe {

namespace {

constexpr int kMaxRounds = 1000;

struct Move {
  StepRecord::Action action = StepRecord::Action::Add;
  std::optional<ScoreRole> role;  // empty for covariates
  std::string element;
  ModelStructure structure;
  std::string target;
};

struct Evaluation {
  bool ok = false;
  std::string error;
  double value = 0.0;
  std::optional<LegitFit> fit;
};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

Evaluation evaluate(const ModelStructure& structure, const Dataset& data,
                    const StepwiseOptions& options, int cv_threads) {
  Evaluation ev;
  try {
    structure.validate(data);
    LegitFit fit = fit_alternating(structure, data, options.fit);
    if (!fit.converged) {
      ev.error = "did not converge";
      return ev;
    }
    switch (options.criterion) {
      case Criterion::Aic: ev.value = fit.aic; break;
      case Criterion::Bic: ev.value = fit.bic; break;
      case Criterion::CvR2:
      case Criterion::CvAuc: {
        const CvResult cv =
            cross_validate(structure, data, options.cv, options.seed, options.fit, cv_threads);
        if (cv.partial) {
          ev.error = "a cross-validation fold failed";
          return ev;
        }
        if (options.criterion == Criterion::CvR2) {
          ev.value = cv.r2;
        } else {
          if (!cv.auc) throw NumericalError("AUC undefined for this outcome");
          ev.value = *cv.auc;
        }
        break;
      }
    }
    if (!std::isfinite(ev.value)) {
      ev.error = "criterion is not finite";
      return ev;
    }
    ev.ok = true;
    ev.fit = std::move(fit);
  } catch (const Error& e) {
    ev.error = e.what();
  }
  return ev;
}

bool improves(Criterion c, double candidate, double current) {
  return lower_is_better(c) ? candidate < current : candidate > current;
}

std::vector<Move> enumerate_moves(const ModelStructure& current, const Candidates& pool,
                                  Direction direction) {
  std::vector<Move> moves;
  if (direction != Direction::Backward) {
    for (const auto& [role, elements] : pool.elements) {
      const ScoreSpec& spec = current.score(role);
      for (const auto& element : elements) {
        if (spec.find(element)) continue;
        ModelStructure s = current;
        s.score(role) = spec.with_element(element);
        moves.push_back({StepRecord::Action::Add, role, element.label(), std::move(s), spec.name()});
      }
    }
    for (const auto& cov : pool.covariates) {
      if (contains(current.covariates, cov)) continue;
      ModelStructure s = current;
      s.covariates.push_back(cov);
      moves.push_back({StepRecord::Action::Add, std::nullopt, cov, std::move(s), "covariates"});
    }
  }
  if (direction != Direction::Forward) {
    for (ScoreRole role : current.roles()) {
      const ScoreSpec& spec = current.score(role);
      if (spec.fixed() || spec.size() < 2) continue;
      for (Index j = 0; j < spec.size(); ++j) {
        ModelStructure s = current;
        s.score(role) = spec.without_element(j);
        moves.push_back({StepRecord::Action::Drop, role,
                         spec.elements()[static_cast<std::size_t>(j)].label(), std::move(s),
                         spec.name()});
      }
    }
    for (std::size_t i = 0; i < current.covariates.size(); ++i) {
      ModelStructure s = current;
      s.covariates.erase(s.covariates.begin() + static_cast<std::ptrdiff_t>(i));
      moves.push_back({StepRecord::Action::Drop, std::nullopt, current.covariates[i], std::move(s),
                       "covariates"});
    }
  }
  return moves;
}

void check_candidates(const ModelStructure& base, const Candidates& candidates,
                      const StepwiseOptions& options) {
  for (const auto& [role, elements] : candidates.elements) {
    if (role == ScoreRole::Env2 && !base.env2) {
      throw UsageError("env2 candidates given for a two-way model");
    }
    const ScoreSpec& spec = base.score(role);
    if (!elements.empty() && spec.fixed()) {
      throw UsageError("score '" + spec.name() + "' has fixed weights; it cannot take candidates");
    }
    for (std::size_t i = 0; i < elements.size(); ++i) {
      if (spec.find(elements[i])) {
        throw UsageError("candidate '" + elements[i].label() + "' is already in score '" +
                         spec.name() + "'");
      }
      for (std::size_t k = 0; k < i; ++k) {
        if (elements[k].same_as(elements[i])) {
          throw UsageError("candidate '" + elements[i].label() + "' is listed twice");
        }
      }
    }
  }
  for (const auto& cov : candidates.covariates) {
    if (contains(base.covariates, cov)) {
      throw UsageError("candidate covariate '" + cov + "' is already in the model");
    }
  }
  if (options.direction == Direction::Forward && candidates.empty()) {
    throw UsageError("forward search needs at least one candidate");
  }
  if (options.criterion == Criterion::CvAuc && base.family != Family::Binomial) {
    throw UsageError("criterion cv_auc needs the binomial family");
  }
  if (options.interactive && (!options.in || !options.out)) {
    throw UsageError("interactive search needs input and output streams");
  }
}

std::string describe(const Move& m) {
  return std::string(m.action == StepRecord::Action::Add ? "add " : "drop ") + m.element +
         (m.role ? " (" + m.target + ")" : " (covariate)");
}

/// Returns the index into `ranked` chosen by the user, or nullopt for stop.
std::optional<std::size_t> prompt(const std::vector<std::size_t>& ranked,
                                  const std::vector<Move>& moves,
                                  const std::vector<Evaluation>& evals, double current,
                                  const StepwiseOptions& options) {
  std::ostream& out = *options.out;
  std::istream& in = *options.in;
  out << "current " << to_string(options.criterion) << ": " << std::setprecision(10) << current
      << "\n";
  out << "  #  move                          criterion        delta\n";
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const std::size_t i = ranked[r];
    std::ostringstream label;
    label << describe(moves[i]);
    out << std::setw(3) << (r + 1) << "  " << std::left << std::setw(30) << label.str()
        << std::right << std::setw(12) << std::fixed << std::setprecision(4) << evals[i].value
        << std::setw(13) << (evals[i].value - current) << std::defaultfloat << "\n";
  }
  while (true) {
    out << "choose 1-" << ranked.size() << " or 'stop': " << std::flush;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line == "stop") return std::nullopt;
    try {
      std::size_t used = 0;
      const long pick = std::stol(line, &used);
      if (used == line.size() && pick >= 1 && pick <= static_cast<long>(ranked.size())) {
        return static_cast<std::size_t>(pick - 1);
      }
    } catch (const std::exception&) {
    }
    out << "invalid choice '" << line << "'\n";
  }
}

}  // namespace

std::string to_string(Direction direction) {
  switch (direction) {
    case Direction::Forward: return "forward";
    case Direction::Backward: return "backward";
    case Direction::Bidirectional: return "bidirectional";
  }
  return "?";
}

std::string to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::Aic: return "aic";
    case Criterion::Bic: return "bic";
    case Criterion::CvR2: return "cv_r2";
    case Criterion::CvAuc: return "cv_auc";
  }
  return "?";
}

Direction parse_direction(const std::string& text) {
  if (text == "forward") return Direction::Forward;
  if (text == "backward") return Direction::Backward;
  if (text == "bidirectional" || text == "both") return Direction::Bidirectional;
  throw UsageError("direction must be forward, backward or bidirectional, got '" + text + "'");
}

Criterion parse_criterion(const std::string& text) {
  if (text == "aic") return Criterion::Aic;
  if (text == "bic") return Criterion::Bic;
  if (text == "cv_r2") return Criterion::CvR2;
  if (text == "cv_auc") return Criterion::CvAuc;
  throw UsageError("criterion must be aic, bic, cv_r2 or cv_auc, got '" + text + "'");
}

bool lower_is_better(Criterion criterion) {
  return criterion == Criterion::Aic || criterion == Criterion::Bic;
}

bool Candidates::empty() const {
  if (!covariates.empty()) return false;
  for (const auto& [role, list] : elements) {
    if (!list.empty()) return false;
  }
  return true;
}

StepwiseTrace stepwise_search(const ModelStructure& base, const Dataset& data,
                              const Candidates& candidates, const StepwiseOptions& options) {
  base.validate();
  check_candidates(base, candidates, options);

  const bool cv = options.criterion == Criterion::CvR2 || options.criterion == Criterion::CvAuc;
  Evaluation start = evaluate(base, data, options, options.threads);
  if (!start.ok) throw NumericalError("starting model could not be evaluated: " + start.error);

  StepwiseTrace trace{{}, start.fit->structure, start.value, {}};
  for (int round = 0; round < kMaxRounds; ++round) {
    std::vector<Move> moves = enumerate_moves(trace.final_structure, candidates, options.direction);
    if (moves.empty()) break;
    std::vector<Evaluation> evals(moves.size());
    parallel_for(moves.size(), cv ? 1 : options.threads, [&](std::size_t i) {
      evals[i] = evaluate(moves[i].structure, data, options, cv ? options.threads : 1);
    });

    const bool any_ok = std::any_of(evals.begin(), evals.end(), [](const Evaluation& e) { return e.ok; });
    if (!any_ok) {
      // Later rounds can legitimately run out of fittable moves.
      if (!trace.steps.empty()) break;
      throw NumericalError("every candidate fit failed; first: " + describe(moves.front()) + ": " +
                           evals.front().error);
    }
    std::vector<std::size_t> ranked;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (evals[i].ok && improves(options.criterion, evals[i].value, trace.final_criterion)) {
        ranked.push_back(i);
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return improves(options.criterion, evals[a].value, evals[b].value);
    });
    if (ranked.empty()) break;

    std::size_t chosen = ranked.front();
    if (options.interactive) {
      auto pick = prompt(ranked, moves, evals, trace.final_criterion, options);
      if (!pick) break;
      chosen = ranked[*pick];
    }

    const Move& move = moves[chosen];
    const LegitFit fitted = canonicalize(*evals[chosen].fit);
    trace.steps.push_back({move.action, move.target, move.element, trace.final_criterion,
                           evals[chosen].value});
    trace.final_structure = fitted.structure;
    trace.final_criterion = evals[chosen].value;

    if (move.action == StepRecord::Action::Add && move.role) {
      const ScoreSpec& spec = fitted.structure.score(*move.role);
      const auto idx = spec.find(ScoreElement::parse(move.element));
      if (idx && spec.weights()(*idx) < 0) {
        std::ostringstream msg;
        msg << "'" << move.element << "' entered score '" << spec.name()
            << "' with a negative weight (" << spec.weights()(*idx)
            << "); consider recoding it as (1 - " << move.element
            << ") so that it enters with a positive weight";
        trace.advisories.push_back(msg.str());
        warn(msg.str());
      }
    }
    if (options.interactive) {
      *options.out << "accepted: " << describe(move) << "\n";
    }
  }
  return trace;
}

}  // namespace gxe
