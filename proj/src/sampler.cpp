#include "gmclab/sampler.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "gmclab/errors.hpp"
#include "linalg_detail.hpp"
#include "radial_table.hpp"

namespace gmclab {

using detail::factor_psd;
using detail::gaussian_vector;
using detail::PsdFactor;

namespace {

/// Gaussian matrix with one realization per row; row r comes entirely from
/// the stream (master_seed, offset + r, layer), so any subset of rows can be
/// regenerated independently.
Eigen::MatrixXd gaussian_rows(std::uint64_t master_seed, std::uint64_t offset,
                              std::uint64_t layer, Eigen::Index rows,
                              Eigen::Index cols) {
    Eigen::MatrixXd z(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        z.row(r) =
            gaussian_vector(master_seed, offset + static_cast<std::uint64_t>(r),
                            layer, cols)
                .transpose();
    return z;
}

PsdFactor checked_factor(const Eigen::MatrixXd& m, const char* what) {
    PsdFactor f = factor_psd(m, what);
    if (f.severe) {
        std::ostringstream msg;
        msg << what << " has eigenvalue " << f.min_eigenvalue
            << " below -1e-8 * " << f.max_eigenvalue;
        throw NotPSD(msg.str());
    }
    return f;
}

} // namespace

void FieldSample::validate() const {
    if (values.size() != static_cast<Eigen::Index>(grid.size()))
        throw ConfigError("field sample size does not match its grid");
    if (!values.allFinite())
        throw ConfigError("field sample contains a non-finite value");
}

Eigen::MatrixXd sample_direct(const DiscretizedOperator& covariance,
                              int n_samples, std::uint64_t master_seed) {
    covariance.validate(1e-10);
    if (n_samples < 0) throw ConfigError("sample count must be >= 0");
    const PsdFactor f =
        checked_factor(covariance.matrix, "the sampling covariance");
    const Eigen::Index n = covariance.matrix.rows();
    return gaussian_rows(master_seed, 0, 0, n_samples, n) *
           f.factor.transpose();
}

// ---------------------------------------------------------------------------
// Multiscale accumulators

MultiscaleState::MultiscaleState(SeedCovariance seed, double delta,
                                 GridSpec grid, std::uint64_t master_seed,
                                 int n_realizations,
                                 std::uint64_t realization_offset)
    : seed_(std::move(seed)),
      delta_(delta),
      grid_(grid),
      master_seed_(master_seed),
      realization_offset_(realization_offset),
      schedule_{0.0} {
    if (!(delta_ > 0.0)) throw ConfigError("delta must be positive");
    if (n_realizations < 1)
        throw ConfigError("a multiscale state needs at least one realization");
    if (seed_.dimension() != grid_.dim)
        throw ConfigError("seed dimension does not match the grid");
    const Eigen::Index n = static_cast<Eigen::Index>(grid_.size());
    rough_ = Eigen::MatrixXd::Zero(n_realizations, n);
    smooth_ = Eigen::MatrixXd::Zero(n_realizations, n);
}

void MultiscaleState::advance(double next_t) {
    const double t_prev = level();
    if (!(next_t > t_prev) || !std::isfinite(next_t))
        throw ConfigError("level schedule must increase strictly (and stay "
                          "finite); the accumulators are already at level " +
                          std::to_string(t_prev));

    const DiscretizedOperator rough_cov = discretize_radial(
        [&](double r) {
            return layer_increment_L(seed_, delta_, r, t_prev, next_t);
        },
        grid_);
    const DiscretizedOperator smooth_cov = discretize_radial(
        [&](double r) {
            return layer_increment_S(seed_, delta_, r, t_prev, next_t);
        },
        grid_);
    const PsdFactor f_rough =
        checked_factor(rough_cov.matrix, "the rough layer covariance");
    const PsdFactor f_smooth =
        checked_factor(smooth_cov.matrix, "the smooth layer covariance");

    const Eigen::Index n = rough_.cols();
    const Eigen::Index rows = rough_.rows();
    const std::uint64_t layer = 2 * static_cast<std::uint64_t>(advances_);
    rough_ += gaussian_rows(master_seed_, realization_offset_, layer, rows, n) *
              f_rough.factor.transpose();
    smooth_ +=
        gaussian_rows(master_seed_, realization_offset_, layer + 1, rows, n) *
        f_smooth.factor.transpose();

    ++advances_;
    schedule_.push_back(next_t);
}

FieldSample MultiscaleState::wrap(const Eigen::MatrixXd& field,
                                  int realization, const char* part) const {
    if (realization < 0 || realization >= realizations())
        throw ConfigError("realization index out of range");
    FieldSample out;
    out.grid = grid_;
    out.values = field.row(realization).transpose();
    out.level = level();
    std::ostringstream tag;
    tag << "multiscale " << part << ": seed=" << seed_.name()
        << " delta=" << delta_ << " level=" << level()
        << " layers=" << advances_;
    out.provenance = tag.str();
    return out;
}

FieldSample MultiscaleState::rough(int realization) const {
    return wrap(rough_, realization, "rough accumulator");
}

FieldSample MultiscaleState::smooth(int realization) const {
    return wrap(smooth_, realization, "smooth accumulator");
}

FieldSample MultiscaleState::combined(int realization) const {
    FieldSample out = wrap(rough_ + smooth_, realization, "combined field");
    return out;
}

MultiscaleState& advance_multiscale(MultiscaleState& state, double next_t) {
    state.advance(next_t);
    return state;
}

// ---------------------------------------------------------------------------
// Smooth limit field

DiscretizedOperator smooth_limit_covariance(const SeedCovariance& seed,
                                            double delta,
                                            const GridSpec& grid) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    return discretize_radial(
        [&](double r) {
            return layer_covariance_S(seed, delta, r, kInfiniteLevel,
                                      kInfiniteLevel);
        },
        grid);
}

FieldSample sample_S_infinity(const SeedCovariance& seed, double delta,
                              const GridSpec& grid, std::uint64_t master_seed,
                              std::uint64_t realization) {
    const DiscretizedOperator cov = smooth_limit_covariance(seed, delta, grid);
    const PsdFactor f =
        checked_factor(cov.matrix, "the smooth limit covariance");
    FieldSample out;
    out.grid = grid;
    out.values =
        f.factor * gaussian_vector(master_seed, realization, 0,
                                   cov.matrix.rows());
    out.level = kInfiniteLevel;
    std::ostringstream tag;
    tag << "smooth limit field: seed=" << seed.name() << " delta=" << delta;
    out.provenance = tag.str();
    return out;
}

// ---------------------------------------------------------------------------
// White-noise cone

namespace {

/// Cell layout of the discretized scale cone.  `weighted` holds, per node
/// row and cell column, the convolution-root value at that node times the
/// cell's noise standard deviation, so a sample is weighted * (iid normals)
/// and the model covariance is weighted * weighted^T.
struct ConeLayout {
    Eigen::MatrixXd weighted;  // nodes x cells
};

/// Noise mass per unit volume of a scale slab [y_lo, y_hi]:
///   int y^{-(d+1)} (1 - y^delta) dy,  in closed form.
double slab_scale_mass(double y_lo, double y_hi, int d, double delta) {
    const double dd = static_cast<double>(d);
    const double first =
        (std::pow(y_lo, -dd) - std::pow(y_hi, -dd)) / dd;
    if (std::abs(dd - delta) < 1e-12)
        return first - std::log(y_hi / y_lo);
    return first - (std::pow(y_lo, delta - dd) - std::pow(y_hi, delta - dd)) /
                       (dd - delta);
}

ConeLayout build_cone_layout(const SeedCovariance& seed, double delta,
                             const GridSpec& grid, double t,
                             int cells_per_support) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (!(t >= 0.0) || !std::isfinite(t))
        throw ConfigError("cone level must be finite and >= 0");
    if (cells_per_support < 1)
        throw ConfigError("cells_per_support must be >= 1");
    if (seed.dimension() != grid.dim)
        throw ConfigError("seed dimension does not match the grid");
    if (!seed.has_factor() || !std::isfinite(seed.factor_support()))
        throw MissingFourierData(
            "seed '" + seed.name() +
            "' carries no compactly supported convolution square root; the "
            "cone construction needs the real-space factor h with h * h = k");

    const int d = grid.dim;
    const double sup_h = seed.factor_support();
    // One knob scales both cell dimensions: doubling cells_per_support also
    // halves the slab thickness, keeping the two discretization errors in
    // lockstep for Richardson refinement.
    const double du =
        (std::log(2.0) / 4.0) * (8.0 / static_cast<double>(cells_per_support));
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());

    struct Slab {
        double y_rep = 0.0;
        double width = 0.0;     // spatial cell width
        double sigma = 0.0;     // per-cell noise standard deviation
        int per_axis = 0;       // spatial cells per axis
        double z_first = 0.0;   // first cell-center offset from grid center
    };
    std::vector<Slab> slabs;
    for (double u_lo = 0.0; u_lo < t - 1e-12; u_lo += du) {
        const double u_hi = std::min(u_lo + du, t);
        Slab s;
        const double y_hi = std::exp(-u_lo);
        const double y_lo = std::exp(-u_hi);
        s.y_rep = std::exp(-0.5 * (u_lo + u_hi));
        s.width = 2.0 * sup_h * s.y_rep / cells_per_support;
        const double half_extent = grid.radius + sup_h * y_hi;
        s.per_axis = static_cast<int>(std::ceil(2.0 * half_extent / s.width));
        s.z_first = -0.5 * (s.per_axis - 1) * s.width;
        s.sigma = std::sqrt(std::pow(s.width, d) *
                            slab_scale_mass(y_lo, y_hi, d, delta));
        slabs.push_back(s);
    }

    Eigen::Index total_cells = 0;
    for (const Slab& s : slabs) {
        Eigen::Index count = 1;
        for (int a = 0; a < d; ++a) count *= s.per_axis;
        total_cells += count;
    }

    ConeLayout layout;
    layout.weighted = Eigen::MatrixXd::Zero(n, total_cells);
    Eigen::Index col = 0;
    for (const Slab& s : slabs) {
        Eigen::Index count = 1;
        for (int a = 0; a < d; ++a) count *= s.per_axis;
        for (Eigen::Index cell = 0; cell < count; ++cell) {
            std::array<double, 3> z{0.0, 0.0, 0.0};
            Eigen::Index rest = cell;
            for (int a = d - 1; a >= 0; --a) {
                z[static_cast<std::size_t>(a)] =
                    grid.center[static_cast<std::size_t>(a)] + s.z_first +
                    static_cast<double>(rest % s.per_axis) * s.width;
                rest /= s.per_axis;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto x = grid.point(i);
                double dist_sq = 0.0;
                for (int a = 0; a < d; ++a) {
                    const double dx = x[static_cast<std::size_t>(a)] -
                                      z[static_cast<std::size_t>(a)];
                    dist_sq += dx * dx;
                }
                const double r = std::sqrt(dist_sq) / s.y_rep;
                if (r < sup_h)
                    layout.weighted(i, col) = s.sigma * seed.factor(r);
            }
            ++col;
        }
    }
    return layout;
}

std::string cone_provenance(const SeedCovariance& seed, double delta, double t,
                            int cells_per_support) {
    std::ostringstream tag;
    tag << "scale cone: seed=" << seed.name() << " delta=" << delta
        << " level=" << t << " cells_per_support=" << cells_per_support;
    return tag.str();
}

} // namespace

Eigen::MatrixXd sample_cone_ensemble(const SeedCovariance& seed, double delta,
                                     const GridSpec& grid, double t,
                                     std::uint64_t master_seed,
                                     int n_realizations,
                                     int cells_per_support) {
    if (n_realizations < 0) throw ConfigError("sample count must be >= 0");
    const ConeLayout layout =
        build_cone_layout(seed, delta, grid, t, cells_per_support);
    return gaussian_rows(master_seed, 0, 0, n_realizations,
                         layout.weighted.cols()) *
           layout.weighted.transpose();
}

FieldSample sample_cone(const SeedCovariance& seed, double delta,
                        const GridSpec& grid, double t,
                        std::uint64_t master_seed, std::uint64_t realization,
                        int cells_per_support) {
    const ConeLayout layout =
        build_cone_layout(seed, delta, grid, t, cells_per_support);
    FieldSample out;
    out.grid = grid;
    out.values = layout.weighted *
                 gaussian_vector(master_seed, realization, 0,
                                 layout.weighted.cols());
    out.level = t;
    out.provenance = cone_provenance(seed, delta, t, cells_per_support);
    return out;
}

Eigen::MatrixXd cone_model_covariance(const SeedCovariance& seed, double delta,
                                      const GridSpec& grid, double t,
                                      int cells_per_support) {
    const ConeLayout layout =
        build_cone_layout(seed, delta, grid, t, cells_per_support);
    return layout.weighted * layout.weighted.transpose();
}

ConeBiasReport cone_bias_report(const SeedCovariance& seed, double delta,
                                const GridSpec& grid, double t,
                                int cells_per_support) {
    ConeBiasReport report;
    report.cells_per_support = cells_per_support;
    const Eigen::MatrixXd coarse =
        cone_model_covariance(seed, delta, grid, t, cells_per_support);
    const Eigen::MatrixXd fine =
        cone_model_covariance(seed, delta, grid, t, 2 * cells_per_support);
    const Eigen::MatrixXd exact =
        discretize_radial(
            [&](double r) { return layer_covariance_L(seed, delta, r, t, t); },
            grid)
            .matrix;
    report.max_bias = (coarse - exact).cwiseAbs().maxCoeff();
    report.refined_max_bias = (fine - exact).cwiseAbs().maxCoeff();
    report.richardson_estimate =
        (4.0 / 3.0) * (coarse - fine).cwiseAbs().maxCoeff();
    return report;
}

// ---------------------------------------------------------------------------
// Rough + remainder decomposition of a log-correlated field

namespace {

/// Remainder covariance on the grid: smooth limit covariance of the dilated
/// seed plus the entrywise gap between the field's remainder g and the
/// dilated seed's own remainder.
Eigen::MatrixXd remainder_covariance(const LogKernel& kernel,
                                     const SeedCovariance& dilated,
                                     double delta, const GridSpec& grid) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    const double own_diag = star_remainder_diag(dilated);
    std::map<double, double> smooth_cache, own_cache;
    auto cached = [](std::map<double, double>& cache, double r, auto&& fn) {
        auto hit = cache.find(r);
        if (hit == cache.end()) hit = cache.emplace(r, fn(r)).first;
        return hit->second;
    };
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto xi = grid.point(i);
        for (Eigen::Index j = i; j < n; ++j) {
            const double r = grid.distance(i, j);
            const double smooth = cached(smooth_cache, r, [&](double rr) {
                return layer_covariance_S(dilated, delta, rr, kInfiniteLevel,
                                          kInfiniteLevel);
            });
            const double own =
                r == 0.0 ? own_diag : cached(own_cache, r, [&](double rr) {
                    return star_remainder(dilated, rr);
                });
            const double v =
                smooth + kernel.remainder(xi, grid.point(j)) - own;
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    return cov;
}

/// Cutoff level beyond which deepening the rough layer no longer moves any
/// off-diagonal covariance entry: exact for compactly supported seeds, and
/// deep enough that the decay-bound tail drops below 1e-12 otherwise.
double rough_cutoff(const SeedCovariance& seed, double spacing) {
    if (seed.compactly_supported())
        return std::max(0.0, std::log(seed.support_radius() / spacing));
    const double a = seed.decay_exponent();
    const double m = std::max(seed.decay_constant(), 1.0);
    return std::max(0.0, std::log(1.0 / spacing) +
                             std::log(m / (a * 1e-12)) / a);
}

} // namespace

DecompositionResult decompose_X(const LogKernel& kernel,
                                const SeedCovariance& seed, double delta,
                                const GridSpec& grid,
                                std::uint64_t master_seed, int n_draws) {
    if (kernel.dimension() != grid.dim || seed.dimension() != grid.dim)
        throw ConfigError("field, seed, and grid dimensions must agree");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (n_draws < 1) throw ConfigError("at least one draw is required");

    const std::array<double, 3> origin{0.0, 0.0, 0.0};
    const double g_diag = kernel.remainder(origin, origin);
    const double own_diag = star_remainder_diag(seed);
    const DilationReport dil = dilation_factor(g_diag, own_diag);
    const SeedCovariance dilated = seed.dilated(dil.lambda);

    GridSpec current = grid;
    int shrinks = 0;
    Eigen::MatrixXd residual_cov;
    PsdFactor residual_factor;
    for (;;) {
        residual_cov = remainder_covariance(kernel, dilated, delta, current);
        residual_factor = factor_psd(residual_cov, "the remainder covariance");
        if (!residual_factor.severe) break;
        if (++shrinks > 8) {
            std::ostringstream msg;
            msg << "remainder covariance still has eigenvalue "
                << residual_factor.min_eigenvalue << " after 8 radius "
                << "halvings (final radius " << current.radius << ")";
            throw NoValidRadius(msg.str());
        }
        current = current.shrunk(2.0);
    }

    const double cutoff = rough_cutoff(dilated, current.spacing());
    const Eigen::MatrixXd rough_cov =
        discretize_radial(
            [&](double r) {
                return layer_covariance_L(dilated, delta, r, cutoff, cutoff);
            },
            current)
            .matrix;
    const PsdFactor rough_factor =
        checked_factor(rough_cov, "the rough layer covariance");

    const Eigen::Index n = rough_cov.rows();
    DecompositionResult out;
    out.grid = current;
    out.shift = dil.shift;
    out.dilation = dil.lambda;
    out.adjusted_shift = dil.adjusted_shift;
    out.level = cutoff;
    out.shrink_count = shrinks;
    out.min_eigenvalue = residual_factor.min_eigenvalue;
    out.rough_covariance = rough_cov;
    out.residual_covariance = residual_cov;
    out.rough_draws = gaussian_rows(master_seed, 0, 0, n_draws, n) *
                      rough_factor.factor.transpose();
    out.residual_draws = gaussian_rows(master_seed, 0, 1, n_draws, n) *
                         residual_factor.factor.transpose();

    std::ostringstream base;
    base << "seed=" << seed.name() << " delta=" << delta
         << " dilation=" << dil.lambda << " radius=" << current.radius;
    out.rough.grid = current;
    out.rough.values = out.rough_draws.row(0).transpose();
    out.rough.level = cutoff;
    out.rough.provenance = "decomposition rough part: " + base.str();
    out.residual.grid = current;
    out.residual.values = out.residual_draws.row(0).transpose();
    out.residual.level = kInfiniteLevel;
    out.residual.provenance = "decomposition remainder: " + base.str();
    out.combined.grid = current;
    out.combined.values = out.rough.values + out.residual.values;
    out.combined.level = cutoff;
    out.combined.provenance = "decomposition combined field: " + base.str();
    return out;
}

// ---------------------------------------------------------------------------
// StationarySampler: circulant embedding of the level covariance.

namespace {

/// Smallest even integer >= m whose prime factors are all in {2, 3, 5}
/// (sizes FFTW handles at full speed).
int next_fft_friendly(int m) {
    for (int p = std::max(m, 4);; ++p) {
        if (p % 2 != 0) continue;
        int x = p;
        while (x % 2 == 0) x /= 2;
        while (x % 3 == 0) x /= 3;
        while (x % 5 == 0) x /= 5;
        if (x == 1) return p;
    }
}

} // namespace

struct StationarySampler::Impl {
    GridSpec grid;
    double level = 0.0;
    int window = 0;
    Eigen::ArrayXd amplitude;  // sqrt(spectrum / M^d) over the stored half
    double* field = nullptr;
    fftw_complex* spectrum = nullptr;
    fftw_plan plan = nullptr;
    std::string provenance;

    ~Impl() {
        if (plan) fftw_destroy_plan(plan);
        if (spectrum) fftw_free(spectrum);
        if (field) fftw_free(field);
    }

    // Hermitian spectral noise: modes equal to their own conjugate image get
    // one real Gaussian at full amplitude, every other stored mode gets an
    // independent complex Gaussian at amplitude/sqrt(2); the conjugate
    // partners that fall inside the stored half (last-axis frequency 0 or
    // Nyquist) are filled explicitly.  Consumes exactly window^dim values of
    // `next` in a fixed order.
    template <class F>
    void fill_spectrum(F&& next) {
        const int M = window;
        const int hc = M / 2 + 1;
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        if (grid.dim == 1) {
            for (int k = 0; k < hc; ++k) {
                double* slot = spectrum[static_cast<std::size_t>(k)];
                const double a = amplitude(k);
                if (k == 0 || 2 * k == M) {
                    slot[0] = a * next();
                    slot[1] = 0.0;
                } else {
                    slot[0] = a * inv_sqrt2 * next();
                    slot[1] = a * inv_sqrt2 * next();
                }
            }
            return;
        }
        for (int k1 = 0; k1 < M; ++k1) {
            const std::size_t base = static_cast<std::size_t>(k1) * hc;
            for (int k2 = 0; k2 < hc; ++k2) {
                double* slot = spectrum[base + static_cast<std::size_t>(k2)];
                const double a =
                    amplitude(static_cast<Eigen::Index>(base) + k2);
                const bool edge2 = k2 == 0 || 2 * k2 == M;
                if (!edge2) {
                    slot[0] = a * inv_sqrt2 * next();
                    slot[1] = a * inv_sqrt2 * next();
                    continue;
                }
                const bool self1 = k1 == 0 || 2 * k1 == M;
                if (self1) {
                    slot[0] = a * next();
                    slot[1] = 0.0;
                } else if (k1 < M - k1) {
                    const double re = a * inv_sqrt2 * next();
                    const double imag = a * inv_sqrt2 * next();
                    slot[0] = re;
                    slot[1] = imag;
                    double* partner =
                        spectrum[static_cast<std::size_t>(M - k1) * hc +
                                 static_cast<std::size_t>(k2)];
                    partner[0] = re;
                    partner[1] = -imag;
                }
                // k1 > M/2 edge slots were filled by their partner above.
            }
        }
    }

    FieldSample transform_and_extract() {
        fftw_execute(plan);
        FieldSample out;
        out.grid = grid;
        out.level = level;
        out.provenance = provenance;
        const int n = grid.points_per_axis;
        out.values.resize(grid.size());
        if (grid.dim == 1) {
            for (int i = 0; i < n; ++i) out.values(i) = field[i];
        } else {
            for (int i1 = 0; i1 < n; ++i1)
                for (int i2 = 0; i2 < n; ++i2)
                    out.values(static_cast<Eigen::Index>(i1) * n + i2) =
                        field[static_cast<std::size_t>(i1) * window + i2];
        }
        return out;
    }
};

StationarySampler::StationarySampler(const SeedCovariance& seed,
                                     const GridSpec& grid, double level)
    : impl_(std::make_unique<Impl>()) {
    if (grid.dim != 1 && grid.dim != 2)
        throw ConfigError("stationary sampler supports dimensions 1 and 2, got " +
                          std::to_string(grid.dim));
    if (!seed.compactly_supported())
        throw ConfigError(
            "stationary sampler needs a compactly supported seed; '" +
            seed.name() + "' has unbounded support");
    if (!(level > 0.0) || !std::isfinite(level))
        throw ConfigError("stationary sampler level must be positive and "
                          "finite, got " +
                          std::to_string(level));
    const int n = grid.points_per_axis;
    const double h = grid.spacing();
    const double supp = seed.support_radius();
    const double cells = std::ceil(supp / h - 1e-12);
    if (cells > 2e7)
        throw ConfigError("stationary sampler window would need " +
                          std::to_string(cells) +
                          " cells to cover the seed support; coarsen the grid");
    const int window = next_fft_friendly(n + static_cast<int>(cells) + 1);
    if (grid.dim == 2 && window > 8192)
        throw ConfigError(
            "stationary sampler window " + std::to_string(window) +
            "^2 exceeds the supported size; coarsen the grid or shrink the "
            "domain");

    Impl& im = *impl_;
    im.grid = grid;
    im.level = level;
    im.window = window;

    const int hc = window / 2 + 1;  // stored spectral columns (r2c layout)
    const std::size_t n_field = grid.dim == 1
                                    ? static_cast<std::size_t>(window)
                                    : static_cast<std::size_t>(window) * window;
    const std::size_t n_spec = grid.dim == 1
                                   ? static_cast<std::size_t>(hc)
                                   : static_cast<std::size_t>(window) * hc;
    im.field = fftw_alloc_real(n_field);
    im.spectrum = fftw_alloc_complex(n_spec);
    if (!im.field || !im.spectrum)
        throw ConfigError("stationary sampler buffer allocation failed");

    // Periodized covariance on the torus.  The window leaves at least the
    // support diameter between a cell and its nearest wrap image, so on the
    // first n cells per axis the periodization agrees with the level kernel
    // exactly; at most the four nearest images can contribute anywhere.
    const auto kval = [&](double r, const detail::RadialTable* table) -> double {
        if (r >= supp) return 0.0;
        if (r == 0.0) return level;
        return table ? (*table)(r) : star_kernel(seed, r, level);
    };
    if (grid.dim == 1) {
        for (int j = 0; j < window; ++j) {
            const double w = static_cast<double>(std::min(j, window - j));
            im.field[j] = kval(w * h, nullptr) +
                          kval((static_cast<double>(window) - w) * h, nullptr);
        }
    } else {
        const detail::RadialTable table(
            [&](double r) { return star_kernel(seed, r, level); }, 0.5 * h,
            supp, 8193);
        for (int j1 = 0; j1 < window; ++j1) {
            const double w1 = static_cast<double>(std::min(j1, window - j1));
            const double m1 = static_cast<double>(window) - w1;
            for (int j2 = 0; j2 < window; ++j2) {
                const double w2 =
                    static_cast<double>(std::min(j2, window - j2));
                const double m2 = static_cast<double>(window) - w2;
                double c = 0.0;
                if (std::hypot(w1, w2) * h < supp) {
                    c = kval(std::hypot(w1, w2) * h, &table) +
                        kval(std::hypot(m1, w2) * h, &table) +
                        kval(std::hypot(w1, m2) * h, &table) +
                        kval(std::hypot(m1, m2) * h, &table);
                }
                im.field[static_cast<std::size_t>(j1) * window + j2] = c;
            }
        }
    }

    // Spectrum of the torus covariance: an aliased sum of the seed's
    // nonnegative spectral density, so negatives can only be rounding.
    fftw_plan forward =
        grid.dim == 1
            ? fftw_plan_dft_r2c_1d(window, im.field, im.spectrum,
                                   FFTW_ESTIMATE)
            : fftw_plan_dft_r2c_2d(window, window, im.field, im.spectrum,
                                   FFTW_ESTIMATE);
    if (!forward) throw ConfigError("stationary sampler FFT planning failed");
    fftw_execute(forward);
    fftw_destroy_plan(forward);

    im.amplitude.resize(static_cast<Eigen::Index>(n_spec));
    double max_eig = 0.0, min_eig = 0.0, max_imag = 0.0;
    for (std::size_t k = 0; k < n_spec; ++k) {
        max_eig = std::max(max_eig, im.spectrum[k][0]);
        min_eig = std::min(min_eig, im.spectrum[k][0]);
        max_imag = std::max(max_imag, std::abs(im.spectrum[k][1]));
    }
    if (min_eig < -1e-9 * max_eig || max_imag > 1e-9 * max_eig) {
        std::ostringstream msg;
        msg << "periodized covariance spectrum is not clean: min " << min_eig
            << ", max " << max_eig << ", max imaginary part " << max_imag;
        throw NotPSD(msg.str());
    }
    const double norm = std::pow(static_cast<double>(window), grid.dim);
    for (std::size_t k = 0; k < n_spec; ++k)
        im.amplitude(static_cast<Eigen::Index>(k)) =
            std::sqrt(std::max(im.spectrum[k][0], 0.0) / norm);

    im.plan = grid.dim == 1
                  ? fftw_plan_dft_c2r_1d(window, im.spectrum, im.field,
                                         FFTW_ESTIMATE)
                  : fftw_plan_dft_c2r_2d(window, window, im.spectrum, im.field,
                                         FFTW_ESTIMATE);
    if (!im.plan) throw ConfigError("stationary sampler FFT planning failed");

    std::ostringstream prov;
    prov << "stationary circulant field: seed=" << seed.name() << " t=" << level
         << " window=" << window;
    im.provenance = prov.str();
}

StationarySampler::~StationarySampler() = default;
StationarySampler::StationarySampler(StationarySampler&&) noexcept = default;
StationarySampler& StationarySampler::operator=(StationarySampler&&) noexcept =
    default;

const GridSpec& StationarySampler::grid() const { return impl_->grid; }
double StationarySampler::level() const { return impl_->level; }
int StationarySampler::window() const { return impl_->window; }

FieldSample StationarySampler::draw(std::uint64_t master_seed,
                                    std::uint64_t realization) {
    RandomStream rng(master_seed, realization, 0);
    impl_->fill_spectrum([&rng] { return rng.next_gaussian(); });
    return impl_->transform_and_extract();
}

Eigen::Index StationarySampler::noise_size() const {
    Eigen::Index size = impl_->window;
    for (int d = 1; d < impl_->grid.dim; ++d) size *= impl_->window;
    return size;
}

FieldSample StationarySampler::draw_from_noise(const Eigen::VectorXd& noise) {
    if (noise.size() != noise_size())
        throw ConfigError("stationary sampler noise vector has " +
                          std::to_string(noise.size()) + " entries, needs " +
                          std::to_string(noise_size()));
    Eigen::Index pos = 0;
    impl_->fill_spectrum([&] { return noise(pos++); });
    if (pos != noise_size())
        throw ConfigError("stationary sampler consumed " +
                          std::to_string(pos) + " noise entries, expected " +
                          std::to_string(noise_size()));
    return impl_->transform_and_extract();
}

} // namespace gmclab
