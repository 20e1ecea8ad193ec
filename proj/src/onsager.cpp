#include "gmclab/onsager.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "gmclab/errors.hpp"
#include "gmclab/kernels.hpp"
#include "gmclab/rng.hpp"
#include "linalg_detail.hpp"
#include "radial_table.hpp"

namespace gmclab {

namespace {

constexpr double kMinSeparation = 1e-6;

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k) {
            dist(j, k) = (points.row(j) - points.row(k)).norm();
            dist(k, j) = dist(j, k);
        }
    return dist;
}

} // namespace

Eigen::VectorXd ChargeConfig::exclusion_radii() const {
    validate();
    const Eigen::Index n = size();
    if (n < 2)
        throw SinglePoint(
            "exclusion radii need at least two charges; a lone charge has "
            "no nearest neighbour");
    const Eigen::MatrixXd dist = pairwise_distances(points);
    Eigen::VectorXd radii(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double nearest = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != j) nearest = std::min(nearest, dist(j, k));
        radii(j) = 0.5 * nearest;
    }
    return radii;
}

void ChargeConfig::validate() const {
    if (points.rows() != charges.size()) {
        std::ostringstream msg;
        msg << "configuration has " << points.rows() << " points but "
            << charges.size() << " charges";
        throw ConfigError(msg.str());
    }
    if (charges.size() == 0) throw ConfigError("configuration is empty");
    if (points.cols() < 1)
        throw ConfigError("points need at least one coordinate");
    if (!points.allFinite())
        throw ConfigError("configuration has a non-finite coordinate");
    for (Eigen::Index j = 0; j < charges.size(); ++j)
        if (charges(j) != 1.0 && charges(j) != -1.0) {
            std::ostringstream msg;
            msg << "charge " << j << " is " << charges(j)
                << "; only unit charges +1/-1 are supported";
            throw ConfigError(msg.str());
        }
    for (Eigen::Index j = 0; j < points.rows(); ++j)
        for (Eigen::Index k = j + 1; k < points.rows(); ++k)
            if ((points.row(j) - points.row(k)).norm() == 0.0) {
                std::ostringstream msg;
                msg << "points " << j << " and " << k
                    << " coincide; charges must sit at distinct locations";
                throw ConfigError(msg.str());
            }
}

double interaction_energy(const KernelRule& kernel, const ChargeConfig& cfg) {
    cfg.validate();
    if (!kernel) throw ConfigError("kernel rule is empty");
    const Eigen::Index n = cfg.size();
    double energy = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k)
            energy -= cfg.charges(j) * cfg.charges(k) *
                      kernel(cfg.points.row(j).transpose(),
                             cfg.points.row(k).transpose());
    return energy;
}

double onsager_budget(const ChargeConfig& cfg) {
    const Eigen::VectorXd radii = cfg.exclusion_radii();
    double budget = 0.0;
    for (Eigen::Index j = 0; j < radii.size(); ++j)
        budget -= 0.5 * std::log(radii(j));
    return budget;
}

ChargeConfig random_charge_config(int dim, double radius, int max_points,
                                  std::uint64_t master_seed,
                                  std::uint64_t trial) {
    if (dim < 1) throw ConfigError("dimension must be at least 1");
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw ConfigError("ball radius must be positive and finite");
    if (max_points < 2)
        throw ConfigError("need room for at least two charges");
    if (radius < kMinSeparation)
        throw ConfigError("ball radius below the minimum separation floor");

    RandomStream rng(master_seed, trial, 0);
    const int n =
        2 + static_cast<int>(rng.next_u32() %
                             static_cast<std::uint32_t>(max_points - 1));
    ChargeConfig cfg;
    cfg.points.resize(n, dim);
    cfg.charges.resize(n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd candidate(dim);
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 10000)
                throw ConfigError(
                    "could not place distinct charges; ball too small for "
                    "the separation floor");
            for (int a = 0; a < dim; ++a)
                candidate(a) = radius * (2.0 * rng.next_uniform() - 1.0);
            if (candidate.norm() > radius) continue;
            bool clear = true;
            for (int k = 0; k < j && clear; ++k)
                clear = (cfg.points.row(k).transpose() - candidate).norm() >=
                        kMinSeparation;
            if (clear) break;
        }
        cfg.points.row(j) = candidate.transpose();
        cfg.charges(j) = (rng.next_u32() & 1u) ? 1.0 : -1.0;
    }
    return cfg;
}

MinimalConstantReport minimal_constant(
    const KernelRule& kernel,
    const std::function<ChargeConfig(std::uint64_t)>& generator, int trials) {
    if (!kernel) throw ConfigError("kernel rule is empty");
    if (!generator) throw ConfigError("config generator is empty");
    if (trials < 1) throw ConfigError("need at least one trial");

    MinimalConstantReport report;
    report.constant = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
        const ChargeConfig cfg =
            generator(static_cast<std::uint64_t>(trial));
        const double value =
            (interaction_energy(kernel, cfg) - onsager_budget(cfg)) /
            static_cast<double>(cfg.size());
        if (value > report.constant) {
            report.constant = value;
            report.argmax_trial = trial;
            report.argmax = cfg;
        }
    }
    return report;
}

KernelRule pure_L_kernel_rule(const SeedCovariance& seed, double delta,
                              double r_min) {
    if (!seed.compactly_supported())
        throw ConfigError(
            "the tabulated rough-layer rule needs a compactly supported "
            "seed; '" +
            seed.name() + "' has unbounded support");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    const double supp = seed.support_radius();
    if (!(r_min > 0.0) || r_min >= supp)
        throw ConfigError(
            "table floor must sit strictly inside the seed support");

    const double range = std::log(supp / r_min);
    const int nodes = std::max(1025, static_cast<int>(range * 400.0) + 1);
    auto table = std::make_shared<detail::RadialTable>(
        [&](double r) {
            return layer_covariance_L(seed, delta, r, kInfiniteLevel,
                                      kInfiniteLevel);
        },
        r_min, supp, nodes);
    const double floor = 0.999 * r_min;
    return [table, floor, supp](const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y) {
        const double r = (x - y).norm();
        if (r >= supp) return 0.0;
        if (r < floor) {
            std::ostringstream msg;
            msg << "pair distance " << r
                << " fell below the tabulated floor " << floor;
            throw ConfigError(msg.str());
        }
        return (*table)(r);
    };
}

double certify_gram_psd(const Eigen::MatrixXd& gram) {
    const auto es = detail::solve_symmetric(gram, "charge Gram matrix");
    const double min_eig = es.eigenvalues().minCoeff();
    const double max_eig =
        std::max(std::abs(es.eigenvalues().maxCoeff()), std::abs(min_eig));
    if (min_eig < -1e-9 * max_eig) {
        std::ostringstream msg;
        msg << "charge Gram matrix has eigenvalue " << min_eig
            << " (largest " << max_eig
            << "); the zero-constant energy bound is not certified";
        throw NotCertified(msg.str());
    }
    return min_eig;
}

GramCertificateReport truncated_gram_certificate(const SeedCovariance& seed,
                                                 double delta,
                                                 const ChargeConfig& cfg) {
    if (!seed.compactly_supported() || seed.support_radius() > 2.0)
        throw ConfigError(
            "the truncation argument needs a seed supported in a ball of "
            "radius at most 2");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    const Eigen::VectorXd radii = cfg.exclusion_radii();
    if (radii.maxCoeff() >= 1.0)
        throw ConfigError(
            "an exclusion radius reaches 1; charges must sit in a small "
            "ball so the truncation levels stay positive");

    const Eigen::Index n = cfg.size();
    GramCertificateReport report;
    report.levels = (-radii.array().log()).matrix();
    report.gram.resize(n, n);
    const Eigen::MatrixXd dist = pairwise_distances(cfg.points);
    for (Eigen::Index j = 0; j < n; ++j) {
        report.gram(j, j) = layer_covariance_L(seed, delta, 0.0,
                                               report.levels(j),
                                               report.levels(j));
        for (Eigen::Index k = j + 1; k < n; ++k) {
            const double truncated =
                layer_covariance_L(seed, delta, dist(j, k), report.levels(j),
                                   report.levels(k));
            const double full = layer_covariance_L(
                seed, delta, dist(j, k), kInfiniteLevel, kInfiniteLevel);
            report.gram(j, k) = truncated;
            report.gram(k, j) = truncated;
            report.max_truncation_gap = std::max(report.max_truncation_gap,
                                                 std::abs(truncated - full));
        }
    }
    if (report.max_truncation_gap > 1e-9) {
        std::ostringstream msg;
        msg << "truncated Gram off-diagonal deviates from the full rough "
               "covariance by "
            << report.max_truncation_gap
            << "; the truncation levels do not reach the interaction "
               "scales";
        throw NotCertified(msg.str());
    }
    report.min_eigenvalue = certify_gram_psd(report.gram);
    return report;
}

} // namespace gmclab
