#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

#include "gmclab/seed_covariance.hpp"

namespace gmclab {

/// Signed unit charges at distinct locations.
struct ChargeConfig {
    Eigen::MatrixXd points;   ///< one row per charge
    Eigen::VectorXd charges;  ///< entries exactly +1 or -1

    Eigen::Index size() const { return charges.size(); }
    int dim() const { return static_cast<int>(points.cols()); }

    /// Exclusion radius of each charge: half the distance to its nearest
    /// neighbour.  Throws SinglePoint when there is no neighbour.
    Eigen::VectorXd exclusion_radii() const;

    /// Throws ConfigError on shape mismatch, non-finite coordinates,
    /// charges other than +1/-1, or coincident points.
    void validate() const;
};

/// Symmetric two-point kernel evaluated at a pair of locations.
using KernelRule =
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Electrostatic interaction energy  -sum_{j<k} q_j q_k C(x_j, x_k).
/// A single charge has zero energy (empty sum).
double interaction_energy(const KernelRule& kernel, const ChargeConfig& cfg);

/// Right-hand side of the electrostatic bound:
///   (1/2) sum_j log(1 / r_j)   with  r_j = (1/2) min_{k != j} |x_j - x_k|.
/// Throws SinglePoint for one charge (no exclusion radius exists).
double onsager_budget(const ChargeConfig& cfg);

/// Uniform random configuration for randomized bound verification: the
/// charge count is uniform on {2, ..., max_points}, the locations are
/// uniform in the centered ball of the given radius with pairwise distances
/// kept above a 1e-6 floor (so log-kernel energies stay finite-precision
/// safe), and the signs are fair coin flips.  Deterministic in
/// (master_seed, trial).
ChargeConfig random_charge_config(int dim, double radius, int max_points,
                                  std::uint64_t master_seed,
                                  std::uint64_t trial);

/// Largest per-charge excess of energy over budget seen across trials.
struct MinimalConstantReport {
    double constant = 0.0;  ///< max over trials of (energy - budget) / n
    int argmax_trial = -1;
    ChargeConfig argmax;
};

/// Evaluates (interaction_energy - onsager_budget)/n on `trials` generated
/// configurations and reports the maximum with its maximizer.  For kernels
/// that admit a matching positive-semidefinite Gram representation with
/// per-charge truncation levels log(1/r_j) the result is <= 0 up to
/// rounding; adding a bounded covariance with sup |C_R| = A shifts the
/// bound to at most A/2.
MinimalConstantReport minimal_constant(
    const KernelRule& kernel,
    const std::function<ChargeConfig(std::uint64_t)>& generator, int trials);

/// Scale-invariant rough-layer covariance at infinite level as a fast
/// kernel rule, tabulated once on a log-spaced radius grid (interpolation
/// error near 1e-11).  Evaluations below 0.999 * r_min throw ConfigError;
/// radii at or beyond the seed support return exactly 0.
KernelRule pure_L_kernel_rule(const SeedCovariance& seed, double delta,
                              double r_min);

/// Gram matrix of the per-charge truncated rough fields.
struct GramCertificateReport {
    Eigen::VectorXd levels;  ///< truncation level log(1/r_j) per charge
    Eigen::MatrixXd gram;    ///< cross-covariances at those levels
    double min_eigenvalue = 0.0;
    /// Largest off-diagonal deviation from the untruncated rough
    /// covariance; the truncation levels are deep enough that the two agree
    /// except for quadrature rounding.
    double max_truncation_gap = 0.0;
};

/// Builds the Gram matrix M_jk = Cov(L_{t_j}(x_j), L_{t_k}(x_k)) with
/// truncation levels t_j = log(1/r_j), checks its off-diagonal against the
/// untruncated rough covariance (within 1e-9) and its positive
/// semidefiniteness.  A passing certificate proves the zero-constant
/// energy bound for this configuration:
///   energy = -(1/2) (q' M q - tr M) <= (1/2) tr M <= budget.
/// Requires a compactly supported seed with support radius <= 2 and every
/// exclusion radius < 1 (positive levels); throws ConfigError otherwise
/// and NotCertified when a check fails.
GramCertificateReport truncated_gram_certificate(const SeedCovariance& seed,
                                                 double delta,
                                                 const ChargeConfig& cfg);

/// Minimum eigenvalue of the symmetrized matrix; throws NotCertified when
/// it falls below -1e-9 times the largest eigenvalue magnitude.
double certify_gram_psd(const Eigen::MatrixXd& gram);

} // namespace gmclab
