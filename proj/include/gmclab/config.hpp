#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace gmclab {

/// Flat key-value experiment description, read from a sectioned text file:
///
///     [experiment]
///     name = decay-scan
///     dim = 1
///     master_seed = 2026
///     samples = 3000
///     output_dir = out/decay
///
///     [grid]
///     points = 1000
///     radius = 0.125
///
///     [kernel]
///     seed = bump            # bump | poisson | triangle
///     delta = 0.5
///
///     [levels]
///     level = 6              # single target level
///     schedule = 1, 2, 3     # or an increasing list
///
///     [gmc]
///     beta = 0.5+0.3i        # complex allowed
///     beta_grid = 1.8, 1.9, 1.95
///     mode = subcritical     # subcritical | seneta-heyde | derivative
///     exponent = 1.5
///     scan = ratio           # ratio | decay  (analytic-scan subcommand)
///
///     [onsager]
///     trials = 100
///     max_points = 16
///     ball_radius = 0.4
///
///     [output]
///     format = csv           # csv | binary  (field realizations)
///
/// Lines starting with '#' and blank lines are ignored.  Unknown sections or
/// keys, malformed values, and out-of-range numbers raise ConfigError with
/// the file name and line number.  No nesting, no substitution.
struct ExperimentConfig {
    // [experiment]
    std::string name = "experiment";
    int dim = 1;
    std::uint64_t master_seed = 1;
    int samples = 100;
    int threads = 0;  ///< 0 = GMC_LAB_THREADS variable or hardware default
    std::string output_dir = "out";

    // [grid]
    int grid_points = 64;
    double grid_radius = 0.5;

    // [kernel]
    std::string seed_name = "bump";
    double delta = 0.5;

    // [levels]
    double level = 3.0;
    std::vector<double> level_schedule;  ///< optional increasing list

    // [gmc]
    std::complex<double> beta{0.5, 0.0};
    std::vector<double> beta_grid;  ///< scan points, real increasing
    std::string chaos_mode = "subcritical";
    double exponent = 0.0;  ///< moment exponent p; 0 = choose automatically
    std::string scan_kind = "ratio";

    // [onsager]
    int trials = 100;
    int max_points = 16;
    double ball_radius = 0.4;

    // [output]
    std::string format = "csv";

    // provenance
    std::string source_path;       ///< file the config came from, or label
    std::uint64_t config_hash = 0; ///< FNV-1a of the raw config bytes

    /// Cross-field checks shared by every subcommand (positive grid, known
    /// seed name, schedule increasing, ...).  Parsing already runs this;
    /// call it again after programmatic edits.  Throws ConfigError.
    void validate() const;
};

/// Reads and validates a config file.  Throws IOError when the file cannot
/// be read and ConfigError (with "<path>:<line>") on syntax or range errors.
ExperimentConfig parse_experiment_config(const std::string& path);

/// Same parser over an in-memory buffer; `label` stands in for the file
/// name in error messages and provenance.
ExperimentConfig parse_experiment_text(const std::string& text,
                                       const std::string& label);

/// 64-bit FNV-1a hash, the scheme used for config and artifact hashes.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);

/// Fixed-width lower-case hex rendering of a hash ("0123abcd...").
std::string hash_hex(std::uint64_t value);

} // namespace gmclab
