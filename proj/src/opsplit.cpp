#include "gmclab/opsplit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/sobolev.hpp"
#include "linalg_detail.hpp"

namespace gmclab {

using detail::factor_psd;
using detail::gaussian_vector;
using detail::PsdFactor;
using detail::solve_symmetric;
using detail::symmetrized;

void DiscretizedOperator::validate(double symmetry_tol) const {
    const std::int64_t n = grid.size();
    if (matrix.rows() != n || matrix.cols() != n || weights.size() != n)
        throw ConfigError("operator size does not match its grid");
    const double asym =
        (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    if (asym > symmetry_tol * scale) {
        std::ostringstream msg;
        msg << "matrix asymmetry " << asym << " exceeds tolerance";
        throw ConfigError(msg.str());
    }
    if (weights.size() > 0 && weights.minCoeff() <= 0.0)
        throw ConfigError("quadrature weights must be positive");
}

DiscretizedOperator discretize(
    const std::function<double(const std::array<double, 3>&,
                               const std::array<double, 3>&)>& rule,
    const GridSpec& grid) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    DiscretizedOperator op;
    op.grid = grid;
    op.matrix.resize(n, n);
    op.weights =
        Eigen::VectorXd::Constant(n, std::pow(grid.spacing(), grid.dim));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto xi = grid.point(i);
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = rule(xi, grid.point(j));
            op.matrix(i, j) = v;
            op.matrix(j, i) = v;
        }
    }
    return op;
}

DiscretizedOperator discretize_radial(
    const std::function<double(double)>& radial, const GridSpec& grid) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    DiscretizedOperator op;
    op.grid = grid;
    op.matrix.resize(n, n);
    op.weights =
        Eigen::VectorXd::Constant(n, std::pow(grid.spacing(), grid.dim));
    std::map<double, double> cache;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double r = grid.distance(i, j);
            auto hit = cache.find(r);
            if (hit == cache.end())
                hit = cache.emplace(r, radial(r)).first;
            op.matrix(i, j) = hit->second;
            op.matrix(j, i) = hit->second;
        }
    }
    return op;
}

Eigen::MatrixXd SpectralDecomposition::reconstruct() const {
    return functions * eigenvalues.asDiagonal() * functions.transpose();
}

Eigen::MatrixXd SpectralDecomposition::absolute() const {
    return functions * eigenvalues.cwiseAbs().asDiagonal() *
           functions.transpose();
}

SpectralDecomposition spectral_decomposition(const DiscretizedOperator& op) {
    op.validate();
    const Eigen::VectorXd root = op.weights.array().sqrt();
    const Eigen::MatrixXd weighted = symmetrized(
        root.asDiagonal() * op.matrix * root.asDiagonal());
    const auto es = solve_symmetric(weighted, "the weighted kernel");

    const Eigen::Index n = weighted.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         return std::abs(es.eigenvalues()(a)) >
                                std::abs(es.eigenvalues()(b));
                     });

    SpectralDecomposition dec;
    dec.grid = op.grid;
    dec.weights = op.weights;
    dec.eigenvalues.resize(n);
    dec.functions.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        dec.eigenvalues(k) = es.eigenvalues()(order[static_cast<std::size_t>(k)]);
        dec.functions.col(k) =
            es.eigenvectors().col(order[static_cast<std::size_t>(k)]).array() /
            root.array();
    }
    return dec;
}

DiscretizedOperator absolute_kernel(const DiscretizedOperator& op) {
    const SpectralDecomposition dec = spectral_decomposition(op);
    DiscretizedOperator out;
    out.grid = op.grid;
    out.weights = op.weights;
    out.matrix = symmetrized(dec.absolute());
    return out;
}

PositivePartSplit positive_parts(const DiscretizedOperator& op) {
    const SpectralDecomposition dec = spectral_decomposition(op);
    PositivePartSplit split;
    split.plus.grid = op.grid;
    split.plus.weights = op.weights;
    split.plus.matrix = symmetrized(
        dec.functions * dec.eigenvalues.cwiseMax(0.0).asDiagonal() *
        dec.functions.transpose());
    split.minus.grid = op.grid;
    split.minus.weights = op.weights;
    // Defining the negative part as plus - K makes the difference identity
    // hold to rounding even when the reconstruction itself carries error.
    split.minus.matrix = split.plus.matrix - op.matrix;
    return split;
}

double kernel_h_norm(const Eigen::MatrixXd& matrix, const GridSpec& grid,
                     double order) {
    const Eigen::Index n = matrix.rows();
    if (matrix.cols() != n || n != static_cast<Eigen::Index>(grid.size()))
        throw ConfigError("kernel matrix does not match the grid");
    PeriodicGridFunction f;
    f.dim = 2 * grid.dim;
    f.n = grid.points_per_axis;
    f.side = 2.0 * grid.radius;
    f.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            f.values[static_cast<std::size_t>(i * n + j)] = {matrix(i, j), 0.0};
    return h_s_norm(f, order);
}

namespace {

TruncationReport truncate_to_rank(const DiscretizedOperator& op,
                                  const SpectralDecomposition& dec, int rank,
                                  double norm_order) {
    const Eigen::Index n = op.matrix.rows();
    TruncationReport report;
    report.rank = rank;
    report.norm_order = norm_order;
    report.truncated.grid = op.grid;
    report.truncated.weights = op.weights;
    if (rank == 0) {
        report.truncated.matrix = Eigen::MatrixXd::Zero(n, n);
    } else {
        const auto funcs = dec.functions.leftCols(rank);
        report.truncated.matrix = symmetrized(
            funcs * dec.eigenvalues.head(rank).asDiagonal() *
            funcs.transpose());
    }
    report.remainder_norm = kernel_h_norm(
        op.matrix - report.truncated.matrix, op.grid, norm_order);
    return report;
}

} // namespace

TruncationReport finite_rank_truncate(const DiscretizedOperator& op, int rank,
                                      double norm_order) {
    if (rank < 0 || rank > op.matrix.rows())
        throw ConfigError("truncation rank must lie in [0, n]");
    return truncate_to_rank(op, spectral_decomposition(op), rank, norm_order);
}

TruncationReport finite_rank_truncate(const DiscretizedOperator& op,
                                      double budget, double norm_order) {
    if (!(budget >= 0.0)) throw ConfigError("truncation budget must be >= 0");
    const SpectralDecomposition dec = spectral_decomposition(op);
    const Eigen::Index n = op.matrix.rows();
    for (int rank = 0; rank < n; ++rank) {
        TruncationReport report = truncate_to_rank(op, dec, rank, norm_order);
        if (report.remainder_norm <= budget) return report;
    }
    std::ostringstream msg;
    msg << "no rank below " << n << " brings the remainder H^" << norm_order
        << " norm within " << budget;
    throw BudgetUnreachable(msg.str());
}

RegularDifferenceSplit regular_difference_split(
    const DiscretizedOperator& c1, const DiscretizedOperator& c2,
    const std::vector<double>& window, double norm_order) {
    c1.validate();
    c2.validate();
    const Eigen::Index n = c1.matrix.rows();
    if (c2.matrix.rows() != n ||
        c1.grid.points_per_axis != c2.grid.points_per_axis ||
        c1.grid.dim != c2.grid.dim ||
        std::abs(c1.grid.radius - c2.grid.radius) > 1e-12 * c1.grid.radius)
        throw ConfigError("kernel difference needs both operators on one grid");
    if (window.size() != static_cast<std::size_t>(n))
        throw ConfigError("window length does not match the grid");

    DiscretizedOperator diff;
    diff.grid = c1.grid;
    diff.weights = c1.weights;
    diff.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            diff.matrix(i, j) = window[static_cast<std::size_t>(i)] *
                                window[static_cast<std::size_t>(j)] *
                                (c1.matrix(i, j) - c2.matrix(i, j));
    diff.matrix = symmetrized(diff.matrix);

    PositivePartSplit parts = positive_parts(diff);
    RegularDifferenceSplit split;
    split.norm_order = norm_order;
    split.plus_norm = kernel_h_norm(parts.plus.matrix, c1.grid, norm_order);
    split.minus_norm = kernel_h_norm(parts.minus.matrix, c1.grid, norm_order);
    split.plus = std::move(parts.plus);
    split.minus = std::move(parts.minus);
    return split;
}

GaussianCoupling::GaussianCoupling(GridSpec grid, Eigen::MatrixXd c1,
                                   Eigen::MatrixXd c2, Eigen::MatrixXd common,
                                   std::uint64_t master_seed)
    : grid_(grid),
      c1_(std::move(c1)),
      c2_(std::move(c2)),
      common_(symmetrized(std::move(common))),
      master_seed_(master_seed) {
    const PsdFactor sigma = factor_psd(common_, "the common covariance");
    if (sigma.severe) {
        std::ostringstream msg;
        msg << "common covariance has eigenvalue " << sigma.min_eigenvalue
            << "; the marginals and parts do not form a coupling";
        throw NotACoupling(msg.str());
    }
    factor_s_ = sigma.factor;
    clipped_ = sigma.clipped;

    // Pseudo-inverse with a relative spectral cutoff: the common covariance
    // may be rank-deficient on coarse grids.
    {
        const auto es = solve_symmetric(common_, "the common covariance");
        const double cutoff = 1e-12 * std::max(sigma.max_eigenvalue, 1e-300);
        Eigen::VectorXd inv = es.eigenvalues();
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            inv(i) = inv(i) > cutoff ? 1.0 / inv(i) : 0.0;
        pinv_ = es.eigenvectors() * inv.asDiagonal() *
                es.eigenvectors().transpose();
    }

    a1_ = c1_ * pinv_;
    a2_ = c2_ * pinv_;
    cross_ = a1_ * c2_;

    residual_1_ = symmetrized(c1_ - a1_ * c1_.transpose());
    residual_2_ = symmetrized(c2_ - a2_ * c2_.transpose());
    for (const auto* residual : {&residual_1_, &residual_2_}) {
        // Tolerance relative to the coupling's scale: a residual that should
        // vanish exactly still carries rounding noise of either sign.
        const PsdFactor f = factor_psd(*residual, "a conditional covariance",
                                       sigma.max_eigenvalue);
        if (f.severe) {
            std::ostringstream msg;
            msg << "conditional covariance has eigenvalue "
                << f.min_eigenvalue << " below tolerance";
            throw ResidualNotPSD(msg.str());
        }
        clipped_ = clipped_ || f.clipped;
        if (residual == &residual_1_)
            factor_r1_ = f.factor;
        else
            factor_r2_ = f.factor;
    }
}

Eigen::MatrixXd GaussianCoupling::difference_covariance() const {
    return c1_ + c2_ - cross_ - cross_.transpose();
}

Eigen::MatrixXd GaussianCoupling::complement_covariance_1() const {
    const Eigen::Index n = c1_.rows();
    const Eigen::MatrixXd residual_map =
        Eigen::MatrixXd::Identity(n, n) - a1_;
    return residual_map * common_ * residual_map.transpose() + residual_1_;
}

Eigen::MatrixXd GaussianCoupling::complement_covariance_2() const {
    const Eigen::Index n = c2_.rows();
    const Eigen::MatrixXd residual_map =
        Eigen::MatrixXd::Identity(n, n) - a2_;
    return residual_map * common_ * residual_map.transpose() + residual_2_;
}

Eigen::MatrixXd GaussianCoupling::joint_covariance() const {
    const Eigen::Index n = c1_.rows();
    Eigen::MatrixXd joint(3 * n, 3 * n);
    joint.block(0, 0, n, n) = c1_;
    joint.block(0, n, n, n) = cross_;
    joint.block(0, 2 * n, n, n) = c1_ - cross_;
    joint.block(n, n, n, n) = c2_;
    joint.block(n, 2 * n, n, n) = cross_.transpose() - c2_;
    joint.block(2 * n, 2 * n, n, n) = difference_covariance();
    joint.block(n, 0, n, n) = joint.block(0, n, n, n).transpose();
    joint.block(2 * n, 0, n, n) = joint.block(0, 2 * n, n, n).transpose();
    joint.block(2 * n, n, n, n) = joint.block(n, 2 * n, n, n).transpose();
    return joint;
}

CouplingSample GaussianCoupling::sample(std::uint64_t realization) const {
    const Eigen::Index n = c1_.rows();
    CouplingSample out;
    out.common = factor_s_ * gaussian_vector(master_seed_, realization, 0, n);
    out.x1 = a1_ * out.common +
             factor_r1_ * gaussian_vector(master_seed_, realization, 1, n);
    out.x2 = a2_ * out.common +
             factor_r2_ * gaussian_vector(master_seed_, realization, 2, n);
    out.g = out.x1 - out.x2;
    return out;
}

GaussianCoupling couple(const DiscretizedOperator& c1,
                        const DiscretizedOperator& c2,
                        const DiscretizedOperator& c_g_plus,
                        const DiscretizedOperator& c_g_minus,
                        std::uint64_t master_seed) {
    c1.validate(1e-10);
    c2.validate(1e-10);
    c_g_plus.validate(1e-10);
    c_g_minus.validate(1e-10);
    const Eigen::Index n = c1.matrix.rows();
    if (c2.matrix.rows() != n || c_g_plus.matrix.rows() != n ||
        c_g_minus.matrix.rows() != n)
        throw ConfigError("all four covariances must share one grid");

    const Eigen::MatrixXd sum1 = c1.matrix + c_g_minus.matrix;
    const Eigen::MatrixXd sum2 = c2.matrix + c_g_plus.matrix;
    const double mismatch = (sum1 - sum2).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, sum1.cwiseAbs().maxCoeff());
    if (mismatch > 1e-9 * scale) {
        std::ostringstream msg;
        msg << "C1 + minus and C2 + plus disagree by " << mismatch
            << "; the common field has no consistent law";
        throw NotACoupling(msg.str());
    }
    return GaussianCoupling(c1.grid, c1.matrix, c2.matrix,
                            0.5 * (sum1 + sum2), master_seed);
}

} // namespace gmclab
