#include "gmclab/gmc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/kernels.hpp"
#include "gmclab/sampler.hpp"
#include "linalg_detail.hpp"

namespace gmclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sum of terms exp(log_mag(i)) * exp(i * phase(i)) with the largest
/// magnitude factored out, so intermediate exponentials stay O(1) no matter
/// how extreme the cells are.  Entries with log_mag = -inf contribute zero.
template <class LogFn, class PhaseFn>
std::complex<double> accumulate_polar(Eigen::Index n, LogFn&& log_mag,
                                      PhaseFn&& phase) {
    double peak = -kInf;
    for (Eigen::Index i = 0; i < n; ++i) peak = std::max(peak, log_mag(i));
    if (peak == -kInf) return {0.0, 0.0};
    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lm = log_mag(i);
        if (lm == -kInf) continue;
        const double mag = std::exp(lm - peak);
        const double ph = phase(i);
        sum += std::complex<double>(mag * std::cos(ph), mag * std::sin(ph));
    }
    // An exact cancellation must not be scaled back up (exp(peak) may be
    // inf, and inf * 0 would poison the result with NaN).
    if (sum.real() == 0.0 && sum.imag() == 0.0) return {0.0, 0.0};
    return std::exp(peak) * sum;
}

double critical_beta(int d) { return std::sqrt(2.0 * d); }

}  // namespace

std::complex<double> ChaosMeasure::mass(Eigen::Index cell) const {
    const double lm = log_magnitude(cell);
    if (lm == -kInf) return {0.0, 0.0};
    const double mag = std::exp(lm);
    return {mag * std::cos(phase(cell)), mag * std::sin(phase(cell))};
}

Eigen::VectorXcd ChaosMeasure::masses() const {
    Eigen::VectorXcd out(cells());
    for (Eigen::Index i = 0; i < cells(); ++i) out(i) = mass(i);
    return out;
}

std::complex<double> ChaosMeasure::total_mass() const {
    return accumulate_polar(
        cells(), [&](Eigen::Index i) { return log_magnitude(i); },
        [&](Eigen::Index i) { return phase(i); });
}

void ChaosMeasure::validate() const {
    if (log_magnitude.size() != grid.size() || phase.size() != grid.size()) {
        std::ostringstream msg;
        msg << "chaos measure stores " << log_magnitude.size()
            << " log-magnitudes and " << phase.size() << " phases for a grid of "
            << grid.size() << " cells";
        throw ConfigError(msg.str());
    }
    for (Eigen::Index i = 0; i < cells(); ++i) {
        const double lm = log_magnitude(i);
        if (std::isnan(lm) || lm == kInf)
            throw ConfigError("chaos measure cell " + std::to_string(i) +
                              " has log-magnitude " + std::to_string(lm));
        if (!std::isfinite(phase(i)))
            throw ConfigError("chaos measure cell " + std::to_string(i) +
                              " has non-finite phase");
    }
}

MollifiedField mollify(const FieldSample& sample,
                       const Eigen::MatrixXd& covariance, double epsilon,
                       const std::function<double(double)>& profile) {
    sample.validate();
    const Eigen::Index n = sample.grid.size();
    if (covariance.rows() != n || covariance.cols() != n) {
        std::ostringstream msg;
        msg << "covariance is " << covariance.rows() << "x" << covariance.cols()
            << " for a field of " << n << " nodes";
        throw ConfigError(msg.str());
    }
    const double h = sample.grid.spacing();
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("mollifier scale must be positive and finite");
    if (epsilon < 2.0 * h) {
        std::ostringstream msg;
        msg << "mollifier scale " << epsilon << " is below twice the grid spacing "
            << h << "; the discrete window would be empty";
        throw EpsilonUnderResolved(msg.str());
    }

    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double rho = sample.grid.distance(i, j) / epsilon;
            if (rho <= 1.0) weights(i, j) = profile(rho);
        }
        const double total = weights.row(i).sum();
        if (!(total > 0.0) || !std::isfinite(total)) {
            std::ostringstream msg;
            msg << "mollifier profile integrates to " << total << " at node " << i
                << "; cannot normalize to unit mass";
            throw ConfigError(msg.str());
        }
        weights.row(i) /= total;
    }

    MollifiedField out;
    out.epsilon = epsilon;
    out.field.grid = sample.grid;
    out.field.values = weights * sample.values;
    out.field.level = std::log(1.0 / epsilon);
    std::ostringstream prov;
    prov << sample.provenance << "; mollified eps=" << epsilon;
    out.field.provenance = prov.str();

    const Eigen::MatrixXd smoothed_rows = weights * covariance;
    out.variance.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.variance(i) = smoothed_rows.row(i).dot(weights.row(i));
    return out;
}

ChaosMeasure chaos_cells(const FieldSample& field,
                         const Eigen::VectorXd& variance,
                         std::complex<double> beta, ChaosMode mode) {
    field.validate();
    const Eigen::Index n = field.grid.size();
    if (variance.size() != n) {
        std::ostringstream msg;
        msg << "variance profile has " << variance.size() << " entries for "
            << n << " cells";
        throw ConfigError(msg.str());
    }
    if (!variance.allFinite())
        throw ConfigError("variance profile has non-finite entries");

    const int d = field.grid.dim;
    const double beta_c = critical_beta(d);
    if (mode != ChaosMode::subcritical) {
        if (beta.imag() != 0.0 || std::abs(beta.real() - beta_c) > 1e-12) {
            std::ostringstream msg;
            msg << "critical normalizations require beta = sqrt(2 d) = "
                << beta_c << "; got (" << beta.real() << ", " << beta.imag()
                << ")";
            throw ConfigError(msg.str());
        }
        if (!(field.level > 0.0) || !std::isfinite(field.level)) {
            std::ostringstream msg;
            msg << "critical normalizations need a finite positive field level; "
                   "got "
                << field.level;
            throw ConfigError(msg.str());
        }
    }

    ChaosMeasure out;
    out.grid = field.grid;
    out.beta = beta;
    out.mode = mode;
    out.level = field.level;
    out.signed_masses = (mode == ChaosMode::derivative);
    out.log_magnitude.resize(n);
    out.phase.resize(n);

    const double log_cell = d * std::log(field.grid.spacing());
    const std::complex<double> half_beta_sq = 0.5 * beta * beta;
    const double sh_extra =
        mode == ChaosMode::seneta_heyde ? 0.5 * std::log(field.level) : 0.0;

    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> exponent =
            beta * field.values(i) - half_beta_sq * variance(i);
        double lm = log_cell + exponent.real() + sh_extra;
        double ph = exponent.imag();
        if (mode == ChaosMode::derivative) {
            const double amplitude =
                -field.values(i) + beta_c * variance(i);
            if (amplitude == 0.0) {
                lm = -kInf;
                ph = 0.0;
            } else {
                lm += std::log(std::abs(amplitude));
                if (amplitude < 0.0) ph += std::numbers::pi;
            }
        }
        out.log_magnitude(i) = lm;
        out.phase(i) = ph;
    }
    return out;
}

std::complex<double> pair_with_test_function(const ChaosMeasure& measure,
                                             const Eigen::VectorXcd& phi) {
    measure.validate();
    if (phi.size() != measure.cells()) {
        std::ostringstream msg;
        msg << "test function has " << phi.size() << " entries for "
            << measure.cells() << " cells";
        throw ConfigError(msg.str());
    }
    return accumulate_polar(
        measure.cells(),
        [&](Eigen::Index i) {
            const double mag = std::abs(phi(i));
            return mag == 0.0 ? -kInf : measure.log_magnitude(i) + std::log(mag);
        },
        [&](Eigen::Index i) { return measure.phase(i) + std::arg(phi(i)); });
}

double second_moment_oracle(const DiscretizedOperator& covariance,
                            std::complex<double> beta,
                            const Eigen::VectorXcd& phi) {
    covariance.validate();
    const Eigen::Index n = covariance.matrix.rows();
    if (phi.size() != n) {
        std::ostringstream msg;
        msg << "test function has " << phi.size() << " entries for " << n
            << " cells";
        throw ConfigError(msg.str());
    }
    const double beta_sq = std::norm(beta);

    // Precompute per-cell log |w_i phi_i| and phases; skip empty cells.
    Eigen::VectorXd cell_log(n);
    Eigen::VectorXd cell_phase(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mag = std::abs(phi(i));
        cell_log(i) =
            mag == 0.0 ? -kInf : std::log(mag) + std::log(covariance.weights(i));
        cell_phase(i) = std::arg(phi(i));
    }

    double peak = -kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cell_log(i) == -kInf) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (cell_log(j) == -kInf) continue;
            peak = std::max(peak, beta_sq * covariance.matrix(i, j) +
                                      cell_log(i) + cell_log(j));
        }
    }
    if (peak == -kInf) return 0.0;

    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cell_log(i) == -kInf) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (cell_log(j) == -kInf) continue;
            const double lm = beta_sq * covariance.matrix(i, j) + cell_log(i) +
                              cell_log(j) - peak;
            const double ph = cell_phase(i) - cell_phase(j);
            sum += std::exp(lm) *
                   std::complex<double>(std::cos(ph), std::sin(ph));
        }
    }
    // The double sum is Hermitian-symmetric, so the imaginary part is
    // rounding noise around an exactly real expectation.
    return std::exp(peak) * sum.real();
}

bool domain_A_contains(std::complex<double> beta, int d) {
    if (d < 1) throw ConfigError("dimension must be at least 1");
    const double re = std::abs(beta.real());
    const double im = std::abs(beta.imag());
    if (std::abs(beta) < std::sqrt(static_cast<double>(d))) return true;
    return re >= std::sqrt(d / 2.0) && re + im < std::sqrt(2.0 * d);
}

double moment_decay_rate(std::complex<double> beta, double p, int d) {
    if (d < 1) throw ConfigError("dimension must be at least 1");
    if (!std::isfinite(p)) throw ConfigError("moment exponent must be finite");
    const double re = beta.real();
    const double im = beta.imag();
    return 0.5 * (p * p - p) * re * re + 0.5 * p * im * im - d * (p - 1.0);
}

double choose_moment_exponent(std::complex<double> beta, int d) {
    double best_p = 0.0;
    double best_rate = kInf;
    // The rate is quadratic in p, so a fine grid over the open interval is
    // an adequate minimizer; endpoints are excluded by construction.
    for (int k = 1; k < 200; ++k) {
        const double p = 1.0 + k / 200.0;
        const double rate = moment_decay_rate(beta, p, d);
        if (rate < best_rate) {
            best_rate = rate;
            best_p = p;
        }
    }
    if (!(best_rate < 0.0)) {
        std::ostringstream msg;
        msg << "no exponent p in (1, 2) gives a negative moment decay rate for "
               "beta = ("
            << beta.real() << ", " << beta.imag() << "); best rate " << best_rate
            << " at p = " << best_p;
        throw RateNotNegative(msg.str());
    }
    return best_p;
}

namespace {

/// Lower-triangular Cholesky factor of the symmetric banded Toeplitz matrix
/// A(i, j) = c[|i - j|] (c indexed 0..bandwidth), stored column-wise as
/// band(k, j) = L(j + k, j).  Wide bands go through Eigen's blocked dense
/// LLT; otherwise a direct banded factorization runs in O(m b^2).
///
/// Smooth stationary kernels make these windows numerically singular (the
/// leading minors are PSD only to ~1e-8 of the spectral scale), which breaks
/// any non-pivoted Cholesky.  Each attempt therefore adds an escalating
/// diagonal ridge of at most 1e-8 of the Gershgorin scale; `diag_value`
/// reports the diagonal actually factored so callers can keep variance
/// bookkeeping exact.
struct BandFactor {
    Eigen::MatrixXd band;
    int bandwidth = 0;
    double diag_value = 0.0;
};

BandFactor banded_toeplitz_cholesky(const std::vector<double>& c,
                                    Eigen::Index m) {
    const Eigen::Index bw = std::min<Eigen::Index>(
        static_cast<Eigen::Index>(c.size()) - 1, m - 1);

    // Spectral scale of the Toeplitz matrix (Gershgorin bound); the
    // diagonal c[0] alone badly underestimates it for wide positive bands.
    double scale = std::abs(c[0]);
    for (std::size_t j = 1; j < c.size(); ++j) scale += 2.0 * std::abs(c[j]);
    if (scale == 0.0) scale = 1.0;

    for (const double ridge : {0.0, 1e-12, 1e-10, 1e-8}) {
        const double c0 = c[0] + ridge * scale;
        BandFactor out;
        out.bandwidth = static_cast<int>(bw);
        out.diag_value = c0;

        if (2 * bw >= m) {
            Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
            for (Eigen::Index j = 0; j < m; ++j)
                for (Eigen::Index i = j;
                     i <= std::min<Eigen::Index>(j + bw, m - 1); ++i)
                    dense(i, j) = dense(j, i) =
                        i == j ? c0 : c[static_cast<std::size_t>(i - j)];
            Eigen::LLT<Eigen::MatrixXd> llt(dense);
            if (llt.info() != Eigen::Success) continue;
            const Eigen::MatrixXd lower = llt.matrixL();
            out.band = Eigen::MatrixXd::Zero(bw + 1, m);
            for (Eigen::Index j = 0; j < m; ++j) {
                const Eigen::Index len =
                    std::min<Eigen::Index>(bw, m - 1 - j) + 1;
                out.band.col(j).head(len) = lower.col(j).segment(j, len);
            }
            return out;
        }

        out.band = Eigen::MatrixXd::Zero(bw + 1, m);
        bool stable = true;
        for (Eigen::Index j = 0; j < m && stable; ++j) {
            const Eigen::Index k0 = std::max<Eigen::Index>(0, j - bw);
            double s = c0;
            for (Eigen::Index k = k0; k < j; ++k) {
                const double l = out.band(j - k, k);
                s -= l * l;
            }
            if (s < -1e-8 * scale) {
                stable = false;
                break;
            }
            const double diag = s > 1e-12 * scale ? std::sqrt(s) : 0.0;
            out.band(0, j) = diag;
            if (diag == 0.0) continue;
            const Eigen::Index imax = std::min<Eigen::Index>(j + bw, m - 1);
            for (Eigen::Index i = j + 1; i <= imax; ++i) {
                double t = c[static_cast<std::size_t>(i - j)];
                const Eigen::Index kk0 = std::max(k0, i - bw);
                for (Eigen::Index k = kk0; k < j; ++k)
                    t -= out.band(i - k, k) * out.band(j - k, k);
                out.band(i - j, j) = t / diag;
            }
        }
        if (stable) return out;
    }
    std::ostringstream msg;
    msg << "stationary covariance window stayed indefinite after a relative "
           "diagonal ridge of 1e-8 (scale "
        << scale << ")";
    throw NotPSD(msg.str());
}

/// y = L z for the banded lower-triangular factor, accumulated column-wise
/// so every access runs down a contiguous band column.
void banded_apply(const BandFactor& f, const Eigen::VectorXd& z,
                  Eigen::VectorXd& y) {
    const Eigen::Index m = z.size();
    y.setZero();
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index len =
            std::min<Eigen::Index>(f.bandwidth, m - 1 - k) + 1;
        y.segment(k, len) += f.band.col(k).head(len) * z(k);
    }
}

}  // namespace

MomentDecayReport increment_moment_decay(
    const SeedCovariance& seed, double delta, int grid_points, double side,
    std::complex<double> beta, double p, int max_level,
    const std::function<double(double)>& psi, int samples,
    std::uint64_t master_seed) {
    if (seed.dimension() != 1)
        throw ConfigError(
            "level-increment moment scan runs on one-dimensional grids; seed '" +
            seed.name() + "' has dimension " +
            std::to_string(seed.dimension()));
    if (!seed.compactly_supported())
        throw ConfigError(
            "level-increment moment scan needs a compactly supported seed; '" +
            seed.name() + "' has unbounded support");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw ConfigError("layer split rate must be positive and finite");
    if (!(p > 1.0) || !(p < 2.0))
        throw ConfigError("moment exponent must lie in (1, 2); got " +
                          std::to_string(p));
    if (max_level < 2)
        throw ConfigError("need at least two increment levels for a slope");
    if (samples < 2)
        throw ConfigError("need at least two Monte Carlo samples");
    if (grid_points < 2 || !(side > 0.0) || !std::isfinite(side))
        throw ConfigError("grid needs >= 2 cells over a positive interval");

    const double rate = moment_decay_rate(beta, p, 1);
    if (!(rate < 0.0)) {
        std::ostringstream msg;
        msg << "moment decay rate " << rate << " for beta = (" << beta.real()
            << ", " << beta.imag() << "), p = " << p
            << " is not negative; level increments need not converge";
        throw RateNotNegative(msg.str());
    }

    GridSpec grid;
    grid.dim = 1;
    grid.points_per_axis = grid_points;
    grid.radius = 0.5 * side;
    const double h = grid.spacing();
    const int n_fields = max_level + 1;  // fields at t = 1..max_level+1
    const double deepest_support =
        seed.support_radius() * std::exp(-static_cast<double>(max_level));
    if (h > deepest_support / std::numbers::e) {
        std::ostringstream msg;
        msg << "grid spacing " << h << " cannot resolve the level-" << n_fields
            << " increment (support " << deepest_support
            << "); need spacing <= " << deepest_support / std::numbers::e;
        throw EpsilonUnderResolved(msg.str());
    }

    const Eigen::Index m = grid.size();

    // One banded stationary factor per unit level window [l-1, l]; the
    // window covariance at lattice lag j is the rough + smooth increment,
    // which is exactly zero beyond the rescaled seed support.
    std::vector<BandFactor> factors;
    std::vector<double> var_profile;  // model variance after each window
    factors.reserve(n_fields);
    var_profile.reserve(n_fields);
    double var_acc = 0.0;
    for (int level = 1; level <= n_fields; ++level) {
        const double lo = level - 1.0;
        const double support = seed.support_radius() * std::exp(-lo);
        const Eigen::Index bw = std::min<Eigen::Index>(
            m - 1, static_cast<Eigen::Index>(support / h) + 1);
        std::vector<double> c(static_cast<std::size_t>(bw) + 1);
        for (Eigen::Index j = 0; j <= bw; ++j) {
            const double r = j * h;
            c[static_cast<std::size_t>(j)] =
                layer_increment_L(seed, delta, r, lo, level) +
                layer_increment_S(seed, delta, r, lo, level);
        }
        factors.push_back(banded_toeplitz_cholesky(c, m));
        var_acc += factors.back().diag_value;
        var_profile.push_back(var_acc);
    }

    Eigen::VectorXd weighted_psi(m);
    for (Eigen::Index i = 0; i < m; ++i)
        weighted_psi(i) = h * psi(grid.point(i)[0]);

    const bool real_beta = beta.imag() == 0.0;
    const double beta_re = beta.real();
    const std::complex<double> half_beta_sq = 0.5 * beta * beta;

    std::vector<double> moment_sums(static_cast<std::size_t>(max_level), 0.0);
    std::vector<std::complex<double>> pair_sums(
        static_cast<std::size_t>(n_fields), {0.0, 0.0});
    std::vector<double> pair_sq_sums(static_cast<std::size_t>(n_fields), 0.0);
    std::vector<double> pair_quad_sums(static_cast<std::size_t>(n_fields), 0.0);
    Eigen::VectorXd field(m), increment(m);
    for (int draw = 0; draw < samples; ++draw) {
        field.setZero();
        std::complex<double> previous{0.0, 0.0};
        for (int level = 1; level <= n_fields; ++level) {
            const Eigen::VectorXd z = detail::gaussian_vector(
                master_seed, static_cast<std::uint64_t>(draw),
                static_cast<std::uint64_t>(level), m);
            banded_apply(factors[static_cast<std::size_t>(level - 1)], z,
                         increment);
            field += increment;

            const double var = var_profile[static_cast<std::size_t>(level - 1)];
            std::complex<double> paired{0.0, 0.0};
            if (real_beta) {
                const double shift = half_beta_sq.real() * var;
                double acc = 0.0;
                for (Eigen::Index i = 0; i < m; ++i)
                    acc += weighted_psi(i) * std::exp(beta_re * field(i) - shift);
                paired = acc;
            } else {
                const std::complex<double> shift = half_beta_sq * var;
                for (Eigen::Index i = 0; i < m; ++i)
                    paired += weighted_psi(i) * std::exp(beta * field(i) - shift);
            }

            const std::size_t slot = static_cast<std::size_t>(level - 1);
            const double abs_sq = std::norm(paired);
            pair_sums[slot] += paired;
            pair_sq_sums[slot] += abs_sq;
            pair_quad_sums[slot] += abs_sq * abs_sq;

            if (level >= 2)
                moment_sums[static_cast<std::size_t>(level - 2)] +=
                    std::pow(std::abs(paired - previous), p);
            previous = paired;
        }
    }

    MomentDecayReport report;
    report.beta = beta;
    report.p = p;
    report.c_beta = rate;
    for (int n = 1; n <= max_level; ++n) {
        report.levels.push_back(n);
        report.moments.push_back(moment_sums[static_cast<std::size_t>(n - 1)] /
                                 samples);
    }
    const double n_draws = static_cast<double>(samples);
    for (int level = 1; level <= n_fields; ++level) {
        const std::size_t slot = static_cast<std::size_t>(level - 1);
        const std::complex<double> mean = pair_sums[slot] / n_draws;
        const double second = pair_sq_sums[slot] / n_draws;
        const double fourth = pair_quad_sums[slot] / n_draws;
        report.pairing_means.push_back(mean);
        report.pairing_mean_ses.push_back(
            std::sqrt(std::max(second - std::norm(mean), 0.0) / n_draws));
        report.pairing_second_moments.push_back(second);
        report.pairing_second_ses.push_back(
            std::sqrt(std::max(fourth - second * second, 0.0) / n_draws));
    }

    // Least-squares slope of log M_n over n, restricted to positive moments
    // (a zero moment means the increments vanished identically, e.g. beta=0).
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < report.moments.size(); ++i) {
        if (report.moments[i] > 0.0) {
            xs.push_back(report.levels[i]);
            ys.push_back(std::log(report.moments[i]));
        }
    }
    if (xs.size() >= 2) {
        const double n_pts = static_cast<double>(xs.size());
        double mean_x = 0.0, mean_y = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mean_x += xs[i];
            mean_y += ys[i];
        }
        mean_x /= n_pts;
        mean_y /= n_pts;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
            sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
        }
        report.fitted_slope = sxy / sxx;
    }
    return report;
}

namespace {

double median_of(std::vector<double>& values) {
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double upper = values[mid];
    if (n % 2 == 1) return upper;
    std::nth_element(values.begin(), values.begin() + mid - 1,
                     values.begin() + mid);
    return 0.5 * (values[mid - 1] + upper);
}

/// Runs `body(realization, field)` over deterministic level-t field draws
/// from the circulant stationary sampler, whose restriction to the grid has
/// exactly the level covariance (equal-point variance = level).
template <class Body>
void for_each_level_field(const SeedCovariance& seed, const GridSpec& grid,
                          double level, int samples,
                          std::uint64_t master_seed, Body&& body) {
    StationarySampler sampler(seed, grid, level);
    for (int r = 0; r < samples; ++r) {
        const FieldSample field =
            sampler.draw(master_seed, static_cast<std::uint64_t>(r));
        body(r, field);
    }
}

}  // namespace

CriticalRatioTable critical_ratio_scan(const SeedCovariance& seed,
                                       const GridSpec& grid, double level,
                                       const std::vector<double>& betas,
                                       const Eigen::VectorXd& phi, int samples,
                                       std::uint64_t master_seed) {
    if (!(level > 0.0) || !std::isfinite(level))
        throw ConfigError("level must be positive and finite");
    if (samples < 2) throw ConfigError("need at least two realizations");
    if (phi.size() != grid.size()) {
        std::ostringstream msg;
        msg << "test function has " << phi.size() << " entries for "
            << grid.size() << " cells";
        throw ConfigError(msg.str());
    }
    const double beta_c = critical_beta(grid.dim);
    if (betas.empty())
        throw ConfigError("need at least one beta to scan");
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0) || !(betas[i] < beta_c)) {
            std::ostringstream msg;
            msg << "beta " << betas[i] << " is outside the subcritical range "
                << "(0, " << beta_c << ")";
            throw ConfigError(msg.str());
        }
        if (i > 0 && !(betas[i] > betas[i - 1]))
            throw ConfigError("beta scan values must increase");
    }

    const Eigen::Index n = grid.size();
    const Eigen::VectorXd variance = Eigen::VectorXd::Constant(n, level);
    const Eigen::VectorXcd phi_c = phi.cast<std::complex<double>>();

    std::vector<std::vector<double>> ratios(
        betas.size(), std::vector<double>(static_cast<std::size_t>(samples)));
    for_each_level_field(
        seed, grid, level, samples, master_seed,
        [&](int realization, const FieldSample& field) {
            const ChaosMeasure sh = chaos_cells(field, variance, beta_c,
                                                ChaosMode::seneta_heyde);
            const double sh_paired =
                pair_with_test_function(sh, phi_c).real();
            for (std::size_t b = 0; b < betas.size(); ++b) {
                const ChaosMeasure sub = chaos_cells(
                    field, variance, betas[b], ChaosMode::subcritical);
                const double sub_paired =
                    pair_with_test_function(sub, phi_c).real();
                ratios[b][static_cast<std::size_t>(realization)] =
                    sub_paired / (beta_c - betas[b]) /
                    (std::sqrt(2.0 * std::numbers::pi) * sh_paired);
            }
        });

    CriticalRatioTable table;
    table.level = level;
    table.samples = samples;
    for (std::size_t b = 0; b < betas.size(); ++b)
        table.rows.push_back({betas[b], median_of(ratios[b])});
    return table;
}

double derivative_to_sh_median_ratio(const SeedCovariance& seed,
                                     const GridSpec& grid, double level,
                                     int samples, std::uint64_t master_seed) {
    if (!(level > 0.0) || !std::isfinite(level))
        throw ConfigError("level must be positive and finite");
    if (samples < 2) throw ConfigError("need at least two realizations");

    const Eigen::Index n = grid.size();
    const Eigen::VectorXd variance = Eigen::VectorXd::Constant(n, level);
    const double beta_c = critical_beta(grid.dim);

    std::vector<double> ratios(static_cast<std::size_t>(samples));
    for_each_level_field(
        seed, grid, level, samples, master_seed,
        [&](int realization, const FieldSample& field) {
            const ChaosMeasure derivative = chaos_cells(
                field, variance, beta_c, ChaosMode::derivative);
            const ChaosMeasure sh = chaos_cells(field, variance, beta_c,
                                                ChaosMode::seneta_heyde);
            ratios[static_cast<std::size_t>(realization)] =
                derivative.total_mass().real() / sh.total_mass().real();
        });
    return median_of(ratios);
}

} // namespace gmclab
