#include "gmclab/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gmclab/config.hpp"
#include "gmclab/errors.hpp"

namespace gmclab {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IOError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IOError("cannot open '" + path + "' for reading");
    return in;
}

[[noreturn]] void malformed(const std::string& path, const std::string& what) {
    throw IOError("malformed file '" + path + "': " + what);
}

} // namespace

std::string format_double(double value) {
    // Shortest representation that round-trips: try increasing precision.
    char buffer[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buffer, sizeof buffer, "%.*g", precision, value);
        if (std::strtod(buffer, nullptr) == value) return buffer;
    }
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix,
                      const GridSpec& grid) {
    std::ofstream out = open_out(path);
    out << "# d=" << grid.dim << " n=" << grid.points_per_axis
        << " h=" << format_double(grid.spacing()) << "\n";
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j) out << ',';
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
    if (!out) throw IOError("write failed for '" + path + "'");
}

MatrixCsv read_matrix_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string header;
    if (!std::getline(in, header)) malformed(path, "empty file");
    MatrixCsv out;
    if (std::sscanf(header.c_str(), "# d=%d n=%d h=%lf", &out.dim,
                    &out.points_per_axis, &out.spacing) != 3)
        malformed(path, "bad header '" + header + "'");

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ','))
            row.push_back(std::strtod(cell.c_str(), nullptr));
        if (!rows.empty() && row.size() != rows.front().size())
            malformed(path, "ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) malformed(path, "no data rows");
    out.matrix.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < out.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < out.matrix.cols(); ++j)
            out.matrix(i, j) = rows[static_cast<std::size_t>(i)]
                                   [static_cast<std::size_t>(j)];
    return out;
}

void emit_plot_data(const std::string& path, const PlotSeries& series) {
    if (series.columns.empty())
        throw IOError("plot series '" + series.name + "' has no columns");
    for (const auto& row : series.rows)
        if (row.size() != series.columns.size())
            throw IOError("plot series '" + series.name +
                          "' has a row width mismatch");
    std::ofstream out = open_out(path);
    out << "# series=" << series.name << " config=" << series.config_hash
        << "\n";
    for (std::size_t c = 0; c < series.columns.size(); ++c) {
        if (c) out << ',';
        out << series.columns[c];
    }
    out << '\n';
    for (const auto& row : series.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << format_double(row[c]);
        }
        out << '\n';
    }
    if (!out) throw IOError("write failed for '" + path + "'");
}

PlotSeries read_plot_data(const std::string& path) {
    std::ifstream in = open_in(path);
    PlotSeries series;
    std::string line;
    if (!std::getline(in, line)) malformed(path, "empty file");
    {
        char name[128] = {0};
        char hash[64] = {0};
        const int got = std::sscanf(line.c_str(), "# series=%127s config=%63s",
                                    name, hash);
        if (got < 1) malformed(path, "bad series header '" + line + "'");
        series.name = name;
        if (got == 2) series.config_hash = hash;
    }
    if (!std::getline(in, line)) malformed(path, "missing column header");
    {
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) series.columns.push_back(cell);
        if (series.columns.empty()) malformed(path, "no columns");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ','))
            row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != series.columns.size())
            malformed(path, "row width mismatch");
        series.rows.push_back(std::move(row));
    }
    return series;
}

namespace {

template <class T>
void put_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
void get_raw(std::ifstream& in, const std::string& path, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) malformed(path, "truncated");
}

} // namespace

void write_field_binary(const std::string& path, const FieldSample& field) {
    field.validate();
    std::ofstream out = open_out(path, true);
    out.write("GMCF", 4);
    put_raw(out, static_cast<std::uint32_t>(field.grid.dim));
    put_raw(out, static_cast<std::uint32_t>(field.grid.points_per_axis));
    put_raw(out, field.grid.radius);
    for (double c : field.grid.center) put_raw(out, c);
    put_raw(out, field.level);
    put_raw(out, static_cast<std::uint64_t>(field.values.size()));
    out.write(reinterpret_cast<const char*>(field.values.data()),
              static_cast<std::streamsize>(field.values.size() *
                                           sizeof(double)));
    if (!out) throw IOError("write failed for '" + path + "'");
}

FieldSample read_field_binary(const std::string& path) {
    std::ifstream in = open_in(path, true);
    char magic[4] = {0};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GMCF", 4) != 0)
        malformed(path, "missing GMCF magic");
    FieldSample field;
    std::uint32_t dim = 0;
    std::uint32_t n = 0;
    get_raw(in, path, dim);
    get_raw(in, path, n);
    if (dim < 1 || dim > 3) malformed(path, "dimension out of range");
    field.grid.dim = static_cast<int>(dim);
    field.grid.points_per_axis = static_cast<int>(n);
    get_raw(in, path, field.grid.radius);
    for (double& c : field.grid.center) get_raw(in, path, c);
    get_raw(in, path, field.level);
    std::uint64_t count = 0;
    get_raw(in, path, count);
    if (count != static_cast<std::uint64_t>(field.grid.size()))
        malformed(path, "node count disagrees with the grid");
    field.values.resize(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(field.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) malformed(path, "truncated payload");
    field.provenance = "read from " + path;
    return field;
}

void write_field_csv(const std::string& path, const FieldSample& field) {
    field.validate();
    std::ofstream out = open_out(path);
    const GridSpec& g = field.grid;
    out << "# d=" << g.dim << " n=" << g.points_per_axis
        << " h=" << format_double(g.spacing()) << "\n";
    for (Eigen::Index i = 0; i < field.values.size(); ++i) {
        const auto x = g.point(i);
        for (int a = 0; a < g.dim; ++a) out << format_double(x[a]) << ',';
        out << format_double(field.values(i)) << '\n';
    }
    if (!out) throw IOError("write failed for '" + path + "'");
}

ArtifactRecord hash_artifact(const std::string& directory,
                             const std::string& file) {
    const std::string path = directory + "/" + file;
    std::ifstream in = open_in(path, true);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    ArtifactRecord record;
    record.file = file;
    record.bytes = bytes.size();
    record.fnv1a64 = hash_hex(fnv1a64(bytes));
    return record;
}

void write_manifest(const std::string& directory,
                    const std::string& experiment_name,
                    std::uint64_t config_hash,
                    const std::vector<ArtifactRecord>& artifacts,
                    double wall_ms) {
    nlohmann::json doc;
    doc["experiment"] = experiment_name;
    doc["config_hash"] = hash_hex(config_hash);
    doc["outputs"] = nlohmann::json::array();
    std::string combined;
    for (const ArtifactRecord& a : artifacts) {
        doc["outputs"].push_back({{"file", a.file},
                                  {"bytes", a.bytes},
                                  {"fnv1a64", a.fnv1a64}});
        combined += a.fnv1a64;
        combined += '\n';
    }
    doc["content_hash"] = hash_hex(fnv1a64(combined));
    doc["wall_ms"] = wall_ms;
    std::ofstream out = open_out(directory + "/manifest.json");
    out << doc.dump(2) << '\n';
    if (!out)
        throw IOError("write failed for '" + directory + "/manifest.json'");
}

} // namespace gmclab
