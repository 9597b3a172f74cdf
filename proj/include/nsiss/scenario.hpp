#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace nsiss {

/// Canonical serialization: keys sorted, floats as %.12e, integers
/// plain, LF line endings, trailing newline.  Two runs that compute the
/// same values emit the same bytes.  Non-finite floats become the
/// strings "inf", "-inf", "nan" (reports only carry them outward).
std::string canonical_json(const nlohmann::json& j);

/// Writes canonical_json(j) to path, creating parent directories.
void write_canonical_json(const nlohmann::json& j, const std::string& path);

/// Scenarios shipped with the toolkit, runnable by name from the CLI.
std::vector<std::string> builtin_scenario_names();
nlohmann::json builtin_scenario(const std::string& name);

/// Reads a scenario file, falling back to the builtin of that name when
/// no such file exists.  Throws SchemaError when neither resolves.
nlohmann::json load_scenario(const std::string& path);

struct ScenarioOutcome {
  /// 0 = all checks pass, 1 = checks ran and failed, 2 = schema or
  /// computation error (see diagnostic).
  int exit_code = 2;
  nlohmann::json report;
  std::string report_path;
  std::string csv_path;
  std::string diagnostic;
};

/// Executes a parsed scenario and writes its report (plus a trajectory
/// CSV for simulate scenarios) into out_dir.  seed, when given,
/// overrides every "seed" entry in the scenario.  Schema violations and
/// propagated computation errors come back as exit code 2, not throws.
ScenarioOutcome run_scenario_json(const nlohmann::json& scenario,
                                  const std::string& out_dir,
                                  std::optional<uint64_t> seed = std::nullopt);

/// File front end: reads path (or a builtin name) and runs it.
ScenarioOutcome run_scenario(const std::string& path, const std::string& out_dir,
                             std::optional<uint64_t> seed = std::nullopt);

}  // namespace nsiss
