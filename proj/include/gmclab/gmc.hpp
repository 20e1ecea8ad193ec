#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "gmclab/opsplit.hpp"
#include "gmclab/sampler.hpp"
#include "gmclab/seed_covariance.hpp"

namespace gmclab {

/// Normalization applied to the exponential of a level-t field when turning
/// it into a multiplicative-chaos measure.
///
///  - subcritical:  cell mass = h^d exp(beta X - beta^2/2 Var X); works for
///    any complex beta and is a mean-one martingale in the level for real
///    beta.
///  - seneta_heyde: the critical measure rescaled by sqrt(t); requires
///    beta = sqrt(2 d) exactly (real), where the plain martingale would
///    collapse to zero.
///  - derivative:   cell mass carries the extra signed amplitude
///    (-X + sqrt(2 d) Var X); requires beta = sqrt(2 d) exactly.  Masses are
///    real but signed.
enum class ChaosMode { subcritical, seneta_heyde, derivative };

/// Multiplicative-chaos measure discretized over grid cells.  Cell masses
/// span hundreds of orders of magnitude, so they are stored in polar form:
/// mass(i) = exp(log_magnitude[i]) * exp(i phase[i]), with
/// log_magnitude = -inf marking an exactly-zero cell.  Real nonnegative
/// measures have phase identically zero; the derivative measure uses
/// phase in {0, pi} for its signed masses.
struct ChaosMeasure {
    GridSpec grid;
    std::complex<double> beta{0.0, 0.0};
    ChaosMode mode = ChaosMode::subcritical;
    double level = 0.0;  ///< scale cutoff t of the field the measure came from
    Eigen::VectorXd log_magnitude;
    Eigen::VectorXd phase;
    /// True for the derivative measure, whose real masses may be negative.
    bool signed_masses = false;

    Eigen::Index cells() const { return log_magnitude.size(); }
    std::complex<double> mass(Eigen::Index cell) const;
    /// All cell masses exponentiated; may over/underflow for extreme cells,
    /// prefer pair_with_test_function for reductions.
    Eigen::VectorXcd masses() const;
    /// Sum of all cell masses, accumulated with the largest magnitude
    /// factored out so intermediate exponentials cannot overflow.
    std::complex<double> total_mass() const;

    /// Throws ConfigError when sizes mismatch, a phase is not finite, or a
    /// log-magnitude is +inf/NaN (-inf is a valid empty cell).
    void validate() const;
};

/// Field smoothed by a radial mollifier at scale epsilon, together with the
/// exact variance profile of the smoothed field (the mollifier quadratic
/// form applied to the covariance, never an asymptotic log(1/eps) shortcut).
struct MollifiedField {
    FieldSample field;
    Eigen::VectorXd variance;  ///< Var X_eps(x_i), one entry per node
    double epsilon = 0.0;
};

/// Smooths a field sample with the radial profile psi(rho) (supported in
/// [0, 1], evaluated at rho = |x_i - x_j| / epsilon) scaled to epsilon.
/// Weights are normalized to unit discrete mass per row, so constants are
/// preserved exactly.  `covariance` must be the model covariance of the
/// input sample; the returned variance profile is (W C W^T)_ii.  The
/// smoothed field's level is log(1/epsilon), matching the level-to-scale
/// correspondence eps = e^{-t} used by the chaos normalizations.
///
/// Throws EpsilonUnderResolved when epsilon < 2 * grid spacing (the discrete
/// window would cover at most one neighbor per side) and ConfigError on size
/// mismatches or a profile that vanishes on the whole window.
MollifiedField mollify(const FieldSample& sample,
                       const Eigen::MatrixXd& covariance, double epsilon,
                       const std::function<double(double)>& profile);

/// Turns a field realization with known per-node variance into chaos cell
/// masses:  mass_i = h^d * prefactor_i * exp(beta X_i - beta^2/2 var_i)
/// with prefactor 1 (subcritical), sqrt(level) (seneta_heyde) or
/// (-X_i + sqrt(2 d) var_i) (derivative).
///
/// The variance profile must be the exact model variance of the supplied
/// field (e.g. the level t for a multiscale field, or MollifiedField's
/// profile).  The critical modes require beta = sqrt(2 dim) exactly and a
/// finite positive field level; violations throw ConfigError.
ChaosMeasure chaos_cells(const FieldSample& field,
                         const Eigen::VectorXd& variance,
                         std::complex<double> beta, ChaosMode mode);

/// Integral of a test function against the measure, sum_i phi_i mass_i,
/// accumulated in factored form so huge log-magnitudes cannot overflow.
std::complex<double> pair_with_test_function(const ChaosMeasure& measure,
                                             const Eigen::VectorXcd& phi);

/// Closed-form second moment of the subcritical pairing:
///   E |mu_beta(phi)|^2 = h^{2d} sum_{ij} phi_i conj(phi_j)
///                        exp(|beta|^2 C(x_i, x_j)),
/// which depends on the covariance only, not on the variance profile (the
/// normalization cancels).  `covariance` is the field covariance on the
/// measure's grid; the double sum is evaluated with the largest exponent
/// factored out.  Throws ConfigError on size mismatches.
double second_moment_oracle(const DiscretizedOperator& covariance,
                            std::complex<double> beta,
                            const Eigen::VectorXcd& phi);

/// Parameter region where p-th moments (p slightly above 1) of complex chaos
/// stay finite:  |beta| < sqrt(d), or
/// |Re beta| >= sqrt(d/2) together with |Re beta| + |Im beta| < sqrt(2 d).
bool domain_A_contains(std::complex<double> beta, int d);

/// Moment-decay exponent for level increments of the normalized chaos:
///   c(beta, p) = (p^2 - p) (Re beta)^2 / 2 + p (Im beta)^2 / 2 - d (p - 1).
/// Negative values certify that E |nu_{n+1}(psi) - nu_n(psi)|^p decays
/// geometrically in the level n.
double moment_decay_rate(std::complex<double> beta, double p, int d);

/// Picks the p in (1, 2) minimizing the decay exponent and returns it;
/// throws RateNotNegative (reporting beta and the best rate found) when no
/// exponent in the open interval gives a negative rate.
double choose_moment_exponent(std::complex<double> beta, int d);

/// Measured decay of the level-increment moments
///   M_n = E |nu_{n+1}(psi) - nu_n(psi)|^p,  nu_t(psi) = mu_{beta,t}(psi),
/// for the multiscale field with unit level steps, plus the least-squares
/// slope of log M_n versus n.
struct MomentDecayReport {
    std::complex<double> beta{0.0, 0.0};
    double p = 0.0;
    double c_beta = 0.0;           ///< analytic decay exponent for (beta, p)
    std::vector<double> levels;    ///< increment indices n = 1..N
    std::vector<double> moments;   ///< Monte Carlo estimates of M_n
    double fitted_slope = 0.0;     ///< LS slope of log M_n over n

    /// Per-level sanity monitors for the pairing nu_t(psi), t = 1..N+1:
    /// the Monte Carlo mean (a martingale, so its expectation is the plain
    /// integral of psi), the second absolute moment (whose exact value is
    /// second_moment_oracle at the level covariance), and their MC standard
    /// errors.
    std::vector<std::complex<double>> pairing_means;
    std::vector<double> pairing_mean_ses;
    std::vector<double> pairing_second_moments;
    std::vector<double> pairing_second_ses;
};

/// Monte Carlo estimate of the level-increment moments for a compactly
/// supported 1-d seed.  The field is built on `grid_points` cells covering
/// an interval of length `side` and advanced through levels t = 1..N+1 by
/// independent unit-level increments, each sampled from its banded
/// stationary covariance; psi is the test function evaluated at node
/// coordinates (interval centered at 0).
///
/// Pre: seed 1-d and compactly supported, delta > 0, beta inside the
/// admissible moment region with moment_decay_rate(beta, p, 1) < 0 (else
/// RateNotNegative), p in (1, 2), max_level >= 2, samples >= 2, and the grid
/// fine enough to resolve the deepest level: side/grid_points <=
/// e^{-(max_level+1)} * seed support (else EpsilonUnderResolved).
MomentDecayReport increment_moment_decay(
    const SeedCovariance& seed, double delta, int grid_points, double side,
    std::complex<double> beta, double p, int max_level,
    const std::function<double(double)>& psi, int samples,
    std::uint64_t master_seed);

/// One row of the near-critical comparison: the median over realizations of
///   [mu_beta(phi) / (beta_c - beta)] / [sqrt(2 pi) mu_SH(phi)],
/// where beta_c = sqrt(2 d) and mu_SH is the Seneta-Heyde measure of the
/// same realization.
struct CriticalRatioRow {
    double beta = 0.0;
    double median_ratio = 0.0;
};

struct CriticalRatioTable {
    double level = 0.0;
    int samples = 0;
    std::vector<CriticalRatioRow> rows;
};

/// Scans subcritical beta values increasing toward the critical point
/// sqrt(2 d) at a fixed level, pairing both measures with phi on each field
/// realization.  Realizations are drawn directly from the level-t field
/// covariance (which does not depend on the rough/smooth layer split) with
/// the (master_seed, realization) counter scheme.  Throws ConfigError when
/// betas is empty, not increasing, or not inside (0, sqrt(2 d)), or when phi
/// has the wrong size.
CriticalRatioTable critical_ratio_scan(const SeedCovariance& seed,
                                       const GridSpec& grid, double level,
                                       const std::vector<double>& betas,
                                       const Eigen::VectorXd& phi, int samples,
                                       std::uint64_t master_seed);

/// Median over realizations of (derivative total mass) / (Seneta-Heyde
/// total mass) at a fixed level; the comparison converges to sqrt(pi/2) as
/// the level grows.  Same sampling scheme as critical_ratio_scan.
double derivative_to_sh_median_ratio(const SeedCovariance& seed,
                                     const GridSpec& grid, double level,
                                     int samples, std::uint64_t master_seed);

} // namespace gmclab
