#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "gmclab/grid.hpp"

namespace gmclab {

/// Symmetric kernel sampled on a grid, together with the quadrature weights
/// (cell volumes) that define the discrete L2 geometry the operator acts on.
struct DiscretizedOperator {
    GridSpec grid;
    Eigen::MatrixXd matrix;   // matrix(i, j) = K(x_i, x_j)
    Eigen::VectorXd weights;  // per-node cell volumes, all > 0

    /// Throws ConfigError when the matrix is not symmetric within tol or a
    /// weight is not positive.
    void validate(double symmetry_tol = 1e-12) const;
};

/// Samples a symmetric kernel rule at all grid point pairs (uniform cell
/// weights spacing^dim).
DiscretizedOperator discretize(
    const std::function<double(const std::array<double, 3>&,
                               const std::array<double, 3>&)>& rule,
    const GridSpec& grid);

/// Samples a radial kernel r -> value over the grid, evaluating each
/// distinct lattice distance once.  Lattice distances repeat heavily, so
/// this is the preferred path for quadrature-backed radial kernels.
DiscretizedOperator discretize_radial(
    const std::function<double(double)>& radial, const GridSpec& grid);

/// Eigen-decomposition of the weighted operator W^{1/2} K W^{1/2}: the
/// eigenvalues are sorted descending by absolute value and the stored
/// functions g_k (columns) are orthonormal for the weighted inner product
/// sum_i g(i) h(i) w_i, so that  K = sum_k lambda_k g_k g_k^T.
struct SpectralDecomposition {
    GridSpec grid;
    Eigen::VectorXd weights;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd functions;

    Eigen::MatrixXd reconstruct() const;  // sum_k lambda_k g_k g_k^T
    Eigen::MatrixXd absolute() const;     // sum_k |lambda_k| g_k g_k^T
};

/// Throws EigensolverFailure when the underlying solver does not converge.
SpectralDecomposition spectral_decomposition(const DiscretizedOperator& op);

/// K_{|T|} = sum_k |lambda_k| g_k g_k^T: the absolute value of the operator
/// in the weighted geometry.  Positive semidefinite, squares to K^2, and
/// keeps every weighted row energy of K.
DiscretizedOperator absolute_kernel(const DiscretizedOperator& op);

/// K = plus - minus with both parts positive semidefinite; the difference is
/// exact by construction and plus + minus matches absolute_kernel.
struct PositivePartSplit {
    DiscretizedOperator plus;
    DiscretizedOperator minus;
};
PositivePartSplit positive_parts(const DiscretizedOperator& op);

struct TruncationReport {
    DiscretizedOperator truncated;  // the kept finite-rank kernel
    int rank = 0;
    double norm_order = 0.0;     // Sobolev order used for the remainder norm
    double remainder_norm = 0.0; // discrete H^order norm of what was dropped
};

/// Keeps the `rank` largest-|lambda| spectral terms.
TruncationReport finite_rank_truncate(const DiscretizedOperator& op, int rank,
                                      double norm_order = 0.0);

/// Smallest rank (at most n-1) whose remainder H^order norm is within
/// `budget`; throws BudgetUnreachable when even rank n-1 misses it.
TruncationReport finite_rank_truncate(const DiscretizedOperator& op,
                                      double budget, double norm_order);

/// Windowed positive-part split of a kernel difference:
///   K(x, y) = psi0(x) psi0(y) (C1 - C2)(x, y) = plus - minus,
/// both parts positive semidefinite, reported with their discrete Sobolev
/// norms of the given order as a regularity diagnostic.
struct RegularDifferenceSplit {
    DiscretizedOperator plus;
    DiscretizedOperator minus;
    double norm_order = 0.0;
    double plus_norm = 0.0;
    double minus_norm = 0.0;
};
RegularDifferenceSplit regular_difference_split(const DiscretizedOperator& c1,
                                                const DiscretizedOperator& c2,
                                                const std::vector<double>& window,
                                                double norm_order);

/// Discrete Sobolev norm of a kernel matrix viewed as samples on the
/// 2*dim-dimensional torus of the grid's cube.
double kernel_h_norm(const Eigen::MatrixXd& matrix, const GridSpec& grid,
                     double order);

struct CouplingSample {
    Eigen::VectorXd common;  // the shared field S
    Eigen::VectorXd x1;
    Eigen::VectorXd x2;
    Eigen::VectorXd g;       // x1 - x2, held exactly
};

/// Joint Gaussian (X1, X2, G) built over a common field S ~ N(0, C1 + Cminus)
/// with X1, X2 conditionally independent given S, marginals C1 and C2, and
/// G = X1 - X2 pathwise.  Sampling is counter-based: a realization index
/// fully determines the draw for a fixed master seed.
class GaussianCoupling {
public:
    GaussianCoupling(GridSpec grid, Eigen::MatrixXd c1, Eigen::MatrixXd c2,
                     Eigen::MatrixXd common, std::uint64_t master_seed);

    const GridSpec& grid() const { return grid_; }
    const Eigen::MatrixXd& common_covariance() const { return common_; }
    const Eigen::MatrixXd& cross_covariance() const { return cross_; }

    /// Covariance of G = X1 - X2: C1 + C2 - M - M^T for M the cross block.
    Eigen::MatrixXd difference_covariance() const;
    /// Covariance of S - X1 (resp. S - X2); equals the complementary
    /// positive part fed into couple() when the inputs are consistent.
    Eigen::MatrixXd complement_covariance_1() const;
    Eigen::MatrixXd complement_covariance_2() const;
    /// Covariance of the stacked vector (X1, X2, G).
    Eigen::MatrixXd joint_covariance() const;

    /// True when small negative eigenvalues had to be clipped to zero while
    /// factoring the common or residual covariances.
    bool clipped() const { return clipped_; }

    CouplingSample sample(std::uint64_t realization) const;

private:
    GridSpec grid_;
    Eigen::MatrixXd c1_, c2_;
    Eigen::MatrixXd common_;       // Sigma = C1 + Cminus
    Eigen::MatrixXd pinv_;         // Sigma^+
    Eigen::MatrixXd a1_, a2_;      // conditional-mean maps Ci Sigma^+
    Eigen::MatrixXd cross_;        // Cov(X1, X2) = C1 Sigma^+ C2
    Eigen::MatrixXd factor_s_;     // Sigma^{1/2} (eigen factor)
    Eigen::MatrixXd factor_r1_, factor_r2_;  // residual factors
    Eigen::MatrixXd residual_1_, residual_2_;
    std::uint64_t master_seed_ = 0;
    bool clipped_ = false;

    friend GaussianCoupling couple(const DiscretizedOperator&,
                                   const DiscretizedOperator&,
                                   const DiscretizedOperator&,
                                   const DiscretizedOperator&, std::uint64_t);
};

/// Builds the coupling from marginal covariances C1, C2 and the positive
/// parts (plus, minus) of their difference: requires C1 + minus = C2 + plus
/// (the law of the common field) within 1e-9, else NotACoupling.  Throws
/// ResidualNotPSD when a conditional covariance is negative beyond
/// tolerance; eigenvalues in [-1e-8 * lambda_max, 0) are clipped to zero
/// with the clipped() flag set.
GaussianCoupling couple(const DiscretizedOperator& c1,
                        const DiscretizedOperator& c2,
                        const DiscretizedOperator& c_g_plus,
                        const DiscretizedOperator& c_g_minus,
                        std::uint64_t master_seed);

} // namespace gmclab
