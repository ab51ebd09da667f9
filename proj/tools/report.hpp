#pragma once

#include "gxe/alternating.hpp"
#include "gxe/selection.hpp"
#include "gxe/simulation.hpp"

#include <json.hpp>

#include <ostream>
#include <string>

namespace gxe::report {

using nlohmann::json;

inline constexpr const char* kSchema = "gxe-report/1";

/// Skeleton shared by every report: schema, command, optional timestamp.
json header(const std::string& command, bool timestamp);

json data_summary(const Dataset& data, const std::string& path);
/// Expects a canonicalized fit.
json fit_json(const LegitFit& fit);
json cv_json(const CvResult& cv, const CvScheme& scheme, std::uint64_t seed);
json stepwise_json(const StepwiseTrace& trace, const StepwiseOptions& options);
json outliers_json(const OutlierReport& report);
json simulation_json(const SimulationReport& report);

void print_fit(std::ostream& out, const LegitFit& fit);
void print_cv(std::ostream& out, const CvResult& cv, const CvScheme& scheme);
void print_stepwise(std::ostream& out, const StepwiseTrace& trace, const StepwiseOptions& options);
void print_outliers(std::ostream& out, const OutlierReport& report);
/// One Table-2-shaped row per scenario.
void print_simulation_header(std::ostream& out);
void print_simulation_row(std::ostream& out, const SimulationReport& report);

/// Relative contribution |w_j| * 100.
double percent(double weight);

}  // namespace gxe::report
