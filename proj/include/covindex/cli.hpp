#pragma once

// Reproducible command driver. A RunConfig fully determines a run; the CLI
// front end only translates flags into one.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "covindex/report.hpp"

namespace covindex {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitVerification = 3,
  kExitAssertion = 4,
};

struct RunConfig {
  nlohmann::json space;  // space JSON; null for commands that build their own
  std::string command;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 1;
  std::string output;  // empty: standard output
  std::string format = "csv";
  nlohmann::json tolerances = nlohmann::json::object();
};

/// Thrown for invalid configurations; maps to kExitConfig.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& command_names();

/// Parameter names and default values of a command.
nlohmann::json command_defaults(const std::string& command);

/// Default tolerances; overrides must use these keys.
nlohmann::json default_tolerances();

/// Parses a configuration document. Unknown fields at any level are rejected.
RunConfig config_from_json(const nlohmann::json& j);

/// Fills defaults and validates parameter types. The result is what gets
/// echoed into output headers. The output path is left out so the echo does
/// not depend on where results are written.
nlohmann::json resolve_config(const RunConfig& config);

/// Resolves a space preset ("l1", "l2", "lq:<q>", "linf", "blocks:<file>").
nlohmann::json space_json_from_preset(const std::string& preset, std::size_t dim);

struct RunResult {
  int exit_code = kExitOk;
  std::string output;   // rendered CSV or JSON
  std::string message;  // single-line status for non-zero exits
  Report report;
};

/// Executes the command. Writes `output` atomically when a path is set.
/// Configuration problems are returned as kExitConfig, never thrown.
RunResult run(const RunConfig& config);

/// The command-line front end; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace covindex
