#pragma once

#include <iosfwd>
#include <string>

#include "gmclab/config.hpp"

namespace gmclab {

/// Exit codes of the experiment runner.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfigError = 1;   ///< bad config or usage
inline constexpr int kExitNumericError = 2;  ///< module reported a failure

/// Executes one subcommand against a parsed config: creates the output
/// directory, runs the experiment, writes its artifacts and a
/// `manifest.json` recording the config hash and per-artifact content
/// hashes.  All artifacts are deterministic functions of the config; only
/// the manifest's wall_ms field varies between runs.
///
/// Subcommands: kernel-table, split, couple, sample, gmc, analytic-scan,
/// onsager, selftest.
///
/// Never throws: returns kExitConfigError for configuration problems and
/// kExitNumericError when a module raises a numeric failure, writing the
/// diagnostic to `err` in both cases.
int run_command(const std::string& subcommand, const ExperimentConfig& config,
                std::ostream& out, std::ostream& err);

/// Full command-line entry point:
///   gmc-lab <subcommand> [--config FILE] [--out DIR] [--seed N]
///           [--threads N]
/// `--config` is required for every subcommand except selftest, which runs
/// with built-in defaults.  Command-line values override the config file.
int cli_main(int argc, const char* const* argv);

} // namespace gmclab
