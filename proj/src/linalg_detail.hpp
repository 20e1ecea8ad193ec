#pragma once

// Internal linear-algebra helpers shared by the covariance-splitting and
// sampling translation units.  Not part of the public interface.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <sstream>

#include "gmclab/errors.hpp"
#include "gmclab/rng.hpp"

namespace gmclab::detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solve_symmetric(
    const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
    if (es.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "eigen decomposition of " << what << " (" << m.rows() << "x"
            << m.cols() << ") did not converge";
        throw EigensolverFailure(msg.str());
    }
    return es;
}

struct PsdFactor {
    Eigen::MatrixXd factor;  // F with F F^T = clipped matrix
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    bool clipped = false;
    bool severe = false;  // eigenvalue below -1e-8 * max
};

/// Spectral square root with clipping.  `scale_floor` widens the severity
/// and zeroing cutoffs for matrices whose own spectrum may collapse to
/// rounding noise (conditional covariances of nearly degenerate couplings).
inline PsdFactor factor_psd(const Eigen::MatrixXd& m, const char* what,
                            double scale_floor = 0.0) {
    const auto es = solve_symmetric(m, what);
    PsdFactor out;
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.max_eigenvalue = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const double tol =
        1e-8 * std::max({out.max_eigenvalue, scale_floor, 1e-300});
    out.severe = out.min_eigenvalue < -tol;
    // Eigenvalues at rounding scale are zeroed outright rather than
    // square-rooted, which would inject sqrt(eps)-sized sampling noise.
    const double zero_cutoff =
        1e-12 * std::max({out.max_eigenvalue, scale_floor, 1e-300});
    Eigen::VectorXd clipped = es.eigenvalues();
    for (Eigen::Index i = 0; i < clipped.size(); ++i) {
        if (clipped(i) < zero_cutoff) {
            if (clipped(i) < 0.0 && clipped(i) >= -tol) out.clipped = true;
            clipped(i) = 0.0;
        }
    }
    out.factor =
        es.eigenvectors() * clipped.array().sqrt().matrix().asDiagonal();
    return out;
}

inline Eigen::VectorXd gaussian_vector(std::uint64_t seed,
                                       std::uint64_t realization,
                                       std::uint64_t layer, Eigen::Index n) {
    RandomStream rng(seed, realization, layer);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.next_gaussian();
    return z;
}

} // namespace gmclab::detail
