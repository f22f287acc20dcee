#pragma once

// The four subcommands. Each returns the report body, an optional CSV table
// and whether every verdict in it passed.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "gshift/config.hpp"
#include "gshift/report.hpp"

namespace gshift::cli {

struct CommandResult {
  nlohmann::json results = nlohmann::json::array();
  CsvTable csv;
  bool pass = true;
  std::vector<std::string> warnings;
};

CommandResult run_bounds(const RunConfig& cfg);
CommandResult run_power(const RunConfig& cfg);
CommandResult run_verify(const RunConfig& cfg);
CommandResult run_support(const RunConfig& cfg);
CommandResult run_command(const RunConfig& cfg);

/// Full report: artifact version, command, config echo, results, status,
/// timings and warnings.
nlohmann::json make_envelope(const RunConfig& cfg, const CommandResult& result, double seconds);

/// Process exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitVerdictFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

/// Loads the config, runs the command, writes the report (and CSV) and
/// returns the exit code. Diagnostics go to `err`.
int run_cli(Command command, const std::filesystem::path& config, const std::filesystem::path& out,
            const std::optional<std::filesystem::path>& csv, std::ostream& err);

}  // namespace gshift::cli
