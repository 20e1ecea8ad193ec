#pragma once

// Shared statistical helpers for Monte Carlo assertions.
//
// "Within 3 standard errors" is applied literally when a check involves a
// handful of quantities.  When a check sweeps thousands of covariance
// entries at once, a per-entry 3-sigma rule would fail by design (about
// 0.27% of entries land outside three standard errors in expectation), so
// bulk checks pass when the outlier fraction stays below 1% and no entry
// exceeds six standard errors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace teststat {

struct CovCheck {
    double max_z = 0.0;       // worst |deviation| / SE over the entries
    double outlier_frac = 0.0; // fraction of entries beyond 3 SE
    std::int64_t entries = 0;

    bool pass() const {
        if (entries <= 10) return max_z <= 3.0;
        return outlier_frac <= 0.01 && max_z <= 6.0;
    }
};

/// Compares an empirical covariance (from `samples` x dim matrix of draws,
/// rows = realizations) against the target, entry by entry, using the
/// Gaussian standard error  SE_ij = sqrt((C_ii C_jj + C_ij^2) / N).
inline CovCheck compare_covariance(const Eigen::MatrixXd& draws,
                                   const Eigen::MatrixXd& target) {
    const auto n = target.rows();
    const double samples = static_cast<double>(draws.rows());
    Eigen::MatrixXd emp = (draws.transpose() * draws) / samples;
    CovCheck out;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double se = std::sqrt(
                (target(i, i) * target(j, j) + target(i, j) * target(i, j)) /
                samples);
            const double z = std::abs(emp(i, j) - target(i, j)) / se;
            out.max_z = std::max(out.max_z, z);
            if (z > 3.0) out.outlier_frac += 1.0;
            ++out.entries;
        }
    }
    out.outlier_frac /= static_cast<double>(out.entries);
    return out;
}

/// Checks that two blocks of jointly drawn columns are uncorrelated:
/// the z-score of each cross pair is sqrt(N) * corr(a_col_i, b_col_j).
inline CovCheck cross_correlation_check(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b) {
    const double n = static_cast<double>(a.rows());
    const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
    const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
    const Eigen::VectorXd sd_a =
        (ac.colwise().squaredNorm() / (n - 1.0)).cwiseSqrt().transpose();
    const Eigen::VectorXd sd_b =
        (bc.colwise().squaredNorm() / (n - 1.0)).cwiseSqrt().transpose();
    const Eigen::MatrixXd cov = (ac.transpose() * bc) / (n - 1.0);
    CovCheck out;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        for (Eigen::Index j = 0; j < cov.cols(); ++j) {
            const double denom = sd_a(i) * sd_b(j);
            const double corr = denom > 0.0 ? cov(i, j) / denom : 0.0;
            const double z = std::abs(corr) * std::sqrt(n);
            out.max_z = std::max(out.max_z, z);
            if (z > 3.0) out.outlier_frac += 1.0;
            ++out.entries;
        }
    }
    out.outlier_frac /= static_cast<double>(out.entries);
    return out;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (static_cast<double>(v.size()) - 1.0);
}

/// Standard error of the sample mean.
inline double se_of_mean(const std::vector<double>& v) {
    return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

} // namespace teststat
