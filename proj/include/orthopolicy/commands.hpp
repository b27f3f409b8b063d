#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "orthopolicy/config.hpp"

namespace orthopolicy {

/// Human-readable table plus line-delimited records. The first record
/// always carries the resolved config, its hash and the seed.
struct CommandOutput {
  std::string table;
  std::vector<nlohmann::json> records;
  std::string jsonl() const;
};

CommandOutput cmd_report(const RunConfig& config);
CommandOutput cmd_optimize(const RunConfig& config);
CommandOutput cmd_simulate(const RunConfig& config);
CommandOutput cmd_probe(const RunConfig& config);

/// Data named by the config: the mapped file, else a draw from the dgp.
struct InputData {
  Dataset data;
  std::size_t dropped_rows = 0;
  std::string source;
};
InputData load_input(const RunConfig& config);

/// Resolves feature names or column indices to covariate columns.
std::vector<std::size_t> resolve_features(const std::vector<std::string>& features, const Dataset& data);

}  // namespace orthopolicy
