#include "gmclab/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gmclab/errors.hpp"

namespace gmclab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& label, int line,
                       const std::string& message) {
    std::ostringstream msg;
    msg << label << ":" << line << ": " << message;
    throw ConfigError(msg.str());
}

double parse_double(const std::string& label, int line,
                    const std::string& value) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        fail(label, line, "expected a number, got '" + value + "'");
    }
    if (trim(value.substr(used)) != "")
        fail(label, line, "trailing characters after number in '" + value + "'");
    if (!std::isfinite(out))
        fail(label, line, "number '" + value + "' is not finite");
    return out;
}

long long parse_integer(const std::string& label, int line,
                        const std::string& value) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        fail(label, line, "expected an integer, got '" + value + "'");
    }
    if (trim(value.substr(used)) != "")
        fail(label, line,
             "trailing characters after integer in '" + value + "'");
    return out;
}

std::uint64_t parse_seed(const std::string& label, int line,
                         const std::string& value) {
    std::size_t used = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(value, &used);
    } catch (const std::exception&) {
        fail(label, line, "expected a seed (unsigned integer), got '" + value +
                              "'");
    }
    if (trim(value.substr(used)) != "")
        fail(label, line, "trailing characters after seed in '" + value + "'");
    return static_cast<std::uint64_t>(out);
}

/// "0.5", "0.5+0.3i", "0.5-0.3i", "0.3i" -> complex.
std::complex<double> parse_complex(const std::string& label, int line,
                                   const std::string& value) {
    std::string s = trim(value);
    if (s.empty()) fail(label, line, "empty complex value");
    if (s.back() == 'i' || s.back() == 'I') {
        s.pop_back();
        // split at the last +/- that is not an exponent sign or leading sign
        std::size_t split = std::string::npos;
        for (std::size_t k = s.size(); k-- > 1;) {
            if ((s[k] == '+' || s[k] == '-') &&
                s[k - 1] != 'e' && s[k - 1] != 'E') {
                split = k;
                break;
            }
        }
        if (split == std::string::npos) {
            // purely imaginary: "0.3i" or "-i"
            const std::string imag = trim(s);
            const double im = imag.empty() || imag == "+"  ? 1.0
                              : imag == "-"                ? -1.0
                              : parse_double(label, line, imag);
            return {0.0, im};
        }
        const double re = parse_double(label, line, trim(s.substr(0, split)));
        std::string imag = trim(s.substr(split));
        double im = 0.0;
        if (imag == "+")
            im = 1.0;
        else if (imag == "-")
            im = -1.0;
        else
            im = parse_double(label, line, imag);
        return {re, im};
    }
    return {parse_double(label, line, s), 0.0};
}

std::vector<double> parse_list(const std::string& label, int line,
                               const std::string& value) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) fail(label, line, "empty entry in list '" + value + "'");
        out.push_back(parse_double(label, line, t));
    }
    if (out.empty()) fail(label, line, "empty list");
    return out;
}

struct Assignment {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

void apply(ExperimentConfig& cfg, const std::string& label,
           const Assignment& a) {
    const std::string& sec = a.section;
    const std::string& key = a.key;
    const std::string& val = a.value;
    const int ln = a.line;

    if (sec == "experiment") {
        if (key == "name") {
            if (val.empty()) fail(label, ln, "experiment name is empty");
            cfg.name = val;
        } else if (key == "dim") {
            const long long d = parse_integer(label, ln, val);
            if (d < 1 || d > 3)
                fail(label, ln, "dim must be 1, 2 or 3");
            cfg.dim = static_cast<int>(d);
        } else if (key == "master_seed") {
            cfg.master_seed = parse_seed(label, ln, val);
        } else if (key == "samples") {
            const long long n = parse_integer(label, ln, val);
            if (n < 1 || n > 10'000'000)
                fail(label, ln, "samples must be in [1, 1e7]");
            cfg.samples = static_cast<int>(n);
        } else if (key == "threads") {
            const long long n = parse_integer(label, ln, val);
            if (n < 0 || n > 4096) fail(label, ln, "threads must be in [0, 4096]");
            cfg.threads = static_cast<int>(n);
        } else if (key == "output_dir") {
            if (val.empty()) fail(label, ln, "output_dir is empty");
            cfg.output_dir = val;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [experiment]");
        }
    } else if (sec == "grid") {
        if (key == "points") {
            const long long n = parse_integer(label, ln, val);
            if (n < 1 || n > 1'000'000)
                fail(label, ln, "grid points must be in [1, 1e6]");
            cfg.grid_points = static_cast<int>(n);
        } else if (key == "radius") {
            const double r = parse_double(label, ln, val);
            if (!(r > 0.0)) fail(label, ln, "grid radius must be positive");
            cfg.grid_radius = r;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [grid]");
        }
    } else if (sec == "kernel") {
        if (key == "seed") {
            if (val != "bump" && val != "poisson" && val != "triangle")
                fail(label, ln,
                     "seed must be bump, poisson or triangle; got '" + val +
                         "'");
            cfg.seed_name = val;
        } else if (key == "delta") {
            const double d = parse_double(label, ln, val);
            if (!(d > 0.0)) fail(label, ln, "delta must be positive");
            cfg.delta = d;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [kernel]");
        }
    } else if (sec == "levels") {
        if (key == "level") {
            const double t = parse_double(label, ln, val);
            if (!(t > 0.0)) fail(label, ln, "level must be positive");
            cfg.level = t;
        } else if (key == "schedule") {
            cfg.level_schedule = parse_list(label, ln, val);
            for (std::size_t k = 0; k < cfg.level_schedule.size(); ++k) {
                if (!(cfg.level_schedule[k] > 0.0))
                    fail(label, ln, "schedule levels must be positive");
                if (k > 0 &&
                    cfg.level_schedule[k] <= cfg.level_schedule[k - 1])
                    fail(label, ln, "schedule must be strictly increasing");
            }
        } else {
            fail(label, ln, "unknown key '" + key + "' in [levels]");
        }
    } else if (sec == "gmc") {
        if (key == "beta") {
            cfg.beta = parse_complex(label, ln, val);
        } else if (key == "beta_grid") {
            cfg.beta_grid = parse_list(label, ln, val);
            for (std::size_t k = 1; k < cfg.beta_grid.size(); ++k)
                if (cfg.beta_grid[k] <= cfg.beta_grid[k - 1])
                    fail(label, ln, "beta_grid must be strictly increasing");
        } else if (key == "mode") {
            if (val != "subcritical" && val != "seneta-heyde" &&
                val != "derivative")
                fail(label, ln,
                     "mode must be subcritical, seneta-heyde or derivative");
            cfg.chaos_mode = val;
        } else if (key == "exponent") {
            const double p = parse_double(label, ln, val);
            if (!(p == 0.0 || (p > 1.0 && p < 2.0)))
                fail(label, ln, "exponent must be 0 (auto) or inside (1, 2)");
            cfg.exponent = p;
        } else if (key == "scan") {
            if (val != "ratio" && val != "decay")
                fail(label, ln, "scan must be ratio or decay");
            cfg.scan_kind = val;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [gmc]");
        }
    } else if (sec == "onsager") {
        if (key == "trials") {
            const long long n = parse_integer(label, ln, val);
            if (n < 1 || n > 10'000'000)
                fail(label, ln, "trials must be in [1, 1e7]");
            cfg.trials = static_cast<int>(n);
        } else if (key == "max_points") {
            const long long n = parse_integer(label, ln, val);
            if (n < 2 || n > 1024)
                fail(label, ln, "max_points must be in [2, 1024]");
            cfg.max_points = static_cast<int>(n);
        } else if (key == "ball_radius") {
            const double r = parse_double(label, ln, val);
            if (!(r > 0.0)) fail(label, ln, "ball_radius must be positive");
            cfg.ball_radius = r;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [onsager]");
        }
    } else if (sec == "output") {
        if (key == "format") {
            if (val != "csv" && val != "binary")
                fail(label, ln, "format must be csv or binary");
            cfg.format = val;
        } else {
            fail(label, ln, "unknown key '" + key + "' in [output]");
        }
    } else {
        fail(label, ln, "unknown section [" + sec + "]");
    }
}

} // namespace

void ExperimentConfig::validate() const {
    auto reject = [&](const std::string& message) {
        throw ConfigError("config '" + name + "': " + message);
    };
    if (dim < 1 || dim > 3) reject("dim out of range");
    if (grid_points < 1) reject("grid points must be positive");
    if (!(grid_radius > 0.0)) reject("grid radius must be positive");
    if (samples < 1) reject("samples must be positive");
    if (!(delta > 0.0)) reject("delta must be positive");
    if (!(level > 0.0)) reject("level must be positive");
    if (seed_name != "bump" && seed_name != "poisson" &&
        seed_name != "triangle")
        reject("unknown seed covariance '" + seed_name + "'");
    if (seed_name == "triangle" && dim != 1)
        reject("the triangle seed exists in dimension 1 only");
    for (std::size_t k = 1; k < level_schedule.size(); ++k)
        if (level_schedule[k] <= level_schedule[k - 1])
            reject("level schedule must be strictly increasing");
    for (std::size_t k = 1; k < beta_grid.size(); ++k)
        if (beta_grid[k] <= beta_grid[k - 1])
            reject("beta grid must be strictly increasing");
}

ExperimentConfig parse_experiment_text(const std::string& text,
                                       const std::string& label) {
    ExperimentConfig cfg;
    cfg.source_path = label;
    cfg.config_hash = fnv1a64(text);

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string stripped = trim(raw);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                fail(label, line, "unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) fail(label, line, "empty section name");
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            fail(label, line, "expected 'key = value', got '" + stripped + "'");
        if (section.empty())
            fail(label, line, "assignment outside any [section]");
        Assignment a;
        a.section = section;
        a.key = trim(stripped.substr(0, eq));
        // Strip a trailing comment from the value.
        std::string value = stripped.substr(eq + 1);
        const std::size_t hash = value.find('#');
        if (hash != std::string::npos) value = value.substr(0, hash);
        a.value = trim(value);
        a.line = line;
        if (a.key.empty()) fail(label, line, "empty key");
        if (a.value.empty()) fail(label, line, "empty value for '" + a.key + "'");
        apply(cfg, label, a);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_text(buffer.str(), path);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 1469598103934665603ull;  // FNV offset basis
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ull;  // FNV prime
    }
    return hash;
}

std::uint64_t fnv1a64(const std::string& text) {
    return fnv1a64(text.data(), text.size());
}

std::string hash_hex(std::uint64_t value) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k) {
        out[static_cast<std::size_t>(k)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

} // namespace gmclab
