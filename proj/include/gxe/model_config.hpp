#pragma once

#include "gxe/dataset.hpp"
#include "gxe/selection.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace gxe {

/// Everything a model config file declares.
struct ModelConfig {
  std::string outcome;
  std::optional<std::string> subject_id;
  ModelStructure structure;
  /// Stepwise candidates (empty when the file has none).
  Candidates candidates;

  /// Columns to read from the data file: model, candidates, outcome, subject.
  std::vector<std::string> data_columns() const;
  LoadOptions load_options(char delimiter = ',') const;
};

/// Parses a JSON model config. Unknown keys and malformed values raise
/// UsageError with the offending key path.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::filesystem::path& path);

}  // namespace gxe
