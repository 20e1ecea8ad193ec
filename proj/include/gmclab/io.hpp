#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "gmclab/grid.hpp"
#include "gmclab/sampler.hpp"

namespace gmclab {

/// Canonical text rendering of a double: shortest round-trip form
/// ("%.17g" trimmed), identical across runs so emitted files are
/// byte-stable.
std::string format_double(double value);

/// Grid kernel matrix as row-major CSV with the one-line header
/// `# d=<d> n=<n> h=<spacing>`.  Values round-trip exactly.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix,
                      const GridSpec& grid);

struct MatrixCsv {
    Eigen::MatrixXd matrix;
    int dim = 0;
    int points_per_axis = 0;
    double spacing = 0.0;
};

/// Parses a file written by write_matrix_csv.  Throws IOError on missing
/// files or malformed headers/rows.
MatrixCsv read_matrix_csv(const std::string& path);

/// Named numeric table for plot-ready two/three-column series.  The first
/// header line carries the config hash, the second the column names.
struct PlotSeries {
    std::string name;
    std::string config_hash;            ///< hex, may be empty
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  ///< each row matches columns
};

/// Writes `series` as CSV: `# series=<name> config=<hash>` then a column
/// header then one comma-separated line per row.  An empty row set yields a
/// header-only file.  Throws IOError on size mismatches or write failure.
void emit_plot_data(const std::string& path, const PlotSeries& series);

/// Round-trips a file written by emit_plot_data.
PlotSeries read_plot_data(const std::string& path);

/// Field realization in the documented flat binary layout, little-endian:
///   bytes 0..3   magic "GMCF"
///   u32          dim
///   u32          points per axis
///   f64          grid radius
///   f64 x 3      grid center
///   f64          level
///   u64          node count N
///   f64 x N      values, row-major
void write_field_binary(const std::string& path, const FieldSample& field);
FieldSample read_field_binary(const std::string& path);

/// Field realization as CSV: `# d=<d> n=<n> h=<spacing>` then one line per
/// node, `x[,y[,z]],value`.
void write_field_csv(const std::string& path, const FieldSample& field);

/// One produced artifact, as recorded in the run manifest.
struct ArtifactRecord {
    std::string file;       ///< name relative to the output directory
    std::uint64_t bytes = 0;
    std::string fnv1a64;    ///< hex content hash
};

/// Hashes a file's bytes with FNV-1a; throws IOError when unreadable.
ArtifactRecord hash_artifact(const std::string& directory,
                             const std::string& file);

/// Writes `manifest.json` into `directory`: experiment name, config hash,
/// per-artifact content hashes, a combined content hash over all artifacts
/// (in listed order), and the wall time.  Every field except wall_ms is a
/// pure function of the config and outputs.
void write_manifest(const std::string& directory,
                    const std::string& experiment_name,
                    std::uint64_t config_hash,
                    const std::vector<ArtifactRecord>& artifacts,
                    double wall_ms);

} // namespace gmclab
