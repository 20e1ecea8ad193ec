#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/kernels.hpp"
#include "gmclab/opsplit.hpp"
#include "gmclab/rng.hpp"
#include "gmclab/seed_covariance.hpp"
#include "gmclab/sobolev.hpp"
#include "support/oracles.hpp"
#include "support/stats.hpp"

using namespace gmclab;

namespace {

constexpr double kTau = 6.28318530717958647692528676655900577;

GridSpec line_grid(int n, double radius = 0.5) {
    GridSpec g;
    g.dim = 1;
    g.points_per_axis = n;
    g.radius = radius;
    return g;
}

DiscretizedOperator operator_from(const Eigen::MatrixXd& m,
                                  const GridSpec& grid) {
    DiscretizedOperator op;
    op.grid = grid;
    op.matrix = m;
    op.weights = Eigen::VectorXd::Constant(
        m.rows(), std::pow(grid.spacing(), grid.dim));
    return op;
}

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
    RandomStream rng(seed);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            m(i, j) = rng.next_gaussian();
            m(j, i) = m(i, j);
        }
    return m;
}

/// Random symmetric band-limited kernel on the unit torus: a quadratic form
/// in the constant, cosine, and sine modes up to frequency 3.
Eigen::MatrixXd random_bandlimited_kernel(const GridSpec& grid,
                                          std::uint64_t seed) {
    const int n = grid.points_per_axis;
    const int modes = 7;
    Eigen::MatrixXd basis(n, modes);
    for (int i = 0; i < n; ++i) {
        const double x = grid.point(i)[0];
        basis(i, 0) = 1.0;
        for (int m = 1; m <= 3; ++m) {
            basis(i, 2 * m - 1) = std::cos(kTau * m * x);
            basis(i, 2 * m) = std::sin(kTau * m * x);
        }
    }
    const Eigen::MatrixXd a = random_symmetric(modes, seed);
    return basis * a * basis.transpose();
}

/// Weighted spectral sum with weight 1 + |xi|^{2s} + |eta|^{2s} over the
/// kernel's Fourier coefficients on the doubled torus.
double spectral_sum(const Eigen::MatrixXd& m, const GridSpec& grid, double s) {
    const int n = grid.points_per_axis;
    PeriodicGridFunction f;
    f.dim = 2;
    f.n = n;
    f.side = 2.0 * grid.radius;
    f.values.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            f.values[static_cast<std::size_t>(i * n + j)] = {m(i, j), 0.0};
    const auto coeffs = fourier_coefficients(f);
    double sum = 0.0;
    for (std::int64_t flat = 0; flat < f.size(); ++flat) {
        const int kj = static_cast<int>(flat % n);
        const int ki = static_cast<int>(flat / n);
        const auto fold = [n](int k) { return k < (n + 1) / 2 ? k : k - n; };
        const double xi = std::abs(fold(ki) / f.side);
        const double eta = std::abs(fold(kj) / f.side);
        const double w =
            1.0 + std::pow(xi, 2.0 * s) + std::pow(eta, 2.0 * s);
        sum += w * std::norm(coeffs[static_cast<std::size_t>(flat)]);
    }
    return sum;
}

} // namespace

TEST_CASE("discretize samples a kernel rule with cell-volume weights") {
    const GridSpec grid = line_grid(32);

    SUBCASE("the zero rule gives the zero operator") {
        const auto op = discretize(
            [](const std::array<double, 3>&, const std::array<double, 3>&) {
                return 0.0;
            },
            grid);
        CHECK(op.matrix.cwiseAbs().maxCoeff() == 0.0);
        CHECK(op.weights(0) == doctest::Approx(1.0 / 32).epsilon(1e-14));
    }

    SUBCASE("a product rule gives a rank-one matrix") {
        const auto f = [](const std::array<double, 3>& x) {
            return x[0] + 0.3;
        };
        const auto op = discretize(
            [&](const std::array<double, 3>& x,
                const std::array<double, 3>& y) { return f(x) * f(y); },
            grid);
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(op.matrix);
        CHECK(svd.singularValues()(0) > 0.0);
        CHECK(svd.singularValues()(1) <=
              1e-12 * svd.singularValues()(0));
    }

    SUBCASE("a smooth-layer covariance matches a per-entry quadrature oracle") {
        const SeedCovariance seed = SeedCovariance::bump(1);
        const double delta = 0.5, level = 1.5;
        const auto op = discretize(
            [&](const std::array<double, 3>& x,
                const std::array<double, 3>& y) {
                return layer_covariance_S(seed, delta, std::abs(x[0] - y[0]),
                                          level, level);
            },
            grid);
        for (Eigen::Index i = 0; i < 32; ++i) {
            for (Eigen::Index j = i; j < 32; ++j) {
                const double r = grid.distance(i, j);
                const double want = oracle::simpson(
                    [&](double u) {
                        return seed(std::exp(u) * r) * std::exp(-delta * u);
                    },
                    0.0, level, 8000);
                CHECK(op.matrix(i, j) == doctest::Approx(want).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("spectral decomposition is weighted-orthonormal and reconstructs") {
    const GridSpec grid = line_grid(64);
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        const auto op = operator_from(random_symmetric(64, 300 + trial), grid);
        const SpectralDecomposition dec = spectral_decomposition(op);

        const double scale = op.matrix.norm();
        CHECK((dec.reconstruct() - op.matrix).norm() <= 1e-8 * scale);

        const Eigen::MatrixXd gram = dec.functions.transpose() *
                                     dec.weights.asDiagonal() * dec.functions;
        CHECK((gram - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs()
                  .maxCoeff() <= 1e-10);

        for (Eigen::Index k = 1; k < 64; ++k)
            CHECK(std::abs(dec.eigenvalues(k)) <=
                  std::abs(dec.eigenvalues(k - 1)) * (1.0 + 1e-14));
    }
}

TEST_CASE("absolute kernel: hand examples, squares, and row energies") {
    SUBCASE("the off-diagonal swap becomes the identity") {
        // Eigenvalues are +-1, so the absolute kernel is the identity.
        GridSpec g = line_grid(2, 1.0);  // spacing 1 => unit weights
        Eigen::MatrixXd k(2, 2);
        k << 0.0, 1.0, 1.0, 0.0;
        const auto abs_op = absolute_kernel(operator_from(k, g));
        CHECK((abs_op.matrix - Eigen::MatrixXd::Identity(2, 2))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
    }

    SUBCASE("positive operators are fixed points") {
        const GridSpec grid = line_grid(32);
        const Eigen::MatrixXd a = random_symmetric(32, 11);
        const Eigen::MatrixXd psd = a * a.transpose();
        const auto out = absolute_kernel(operator_from(psd, grid));
        CHECK((out.matrix - psd).cwiseAbs().maxCoeff() <=
              1e-10 * psd.cwiseAbs().maxCoeff());
    }

    SUBCASE("random operators: invariants on one hundred draws") {
        const GridSpec grid = line_grid(64);
        const double h = grid.spacing();
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            const Eigen::MatrixXd k = random_symmetric(64, 5000 + trial);
            const auto op = operator_from(k, grid);
            const auto abs_op = absolute_kernel(op);
            const double scale = k.cwiseAbs().maxCoeff();
            CAPTURE(trial);

            // Positive semidefinite within tolerance.
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                abs_op.matrix);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10 * scale * 64);

            // Same square.
            const Eigen::MatrixXd sq_in = k * k;
            const Eigen::MatrixXd sq_out = abs_op.matrix * abs_op.matrix;
            CHECK((sq_in - sq_out).norm() <= 1e-8 * sq_in.norm());

            // Same Hilbert-Schmidt norm.
            CHECK(abs_op.matrix.norm() ==
                  doctest::Approx(k.norm()).epsilon(1e-10));

            // Same weighted row energies (diagonal of K W K).
            const Eigen::VectorXd row_in = (k * h * k).diagonal();
            const Eigen::VectorXd row_out =
                (abs_op.matrix * h * abs_op.matrix).diagonal();
            CHECK((row_in - row_out).cwiseAbs().maxCoeff() <=
                  1e-10 * row_in.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("positive parts split any symmetric kernel into PSD summands") {
    SUBCASE("the swap kernel splits into the two half matrices") {
        GridSpec g = line_grid(2, 1.0);
        Eigen::MatrixXd k(2, 2);
        k << 0.0, 1.0, 1.0, 0.0;
        const auto split = positive_parts(operator_from(k, g));
        Eigen::MatrixXd plus(2, 2), minus(2, 2);
        plus << 0.5, 0.5, 0.5, 0.5;
        minus << 0.5, -0.5, -0.5, 0.5;
        CHECK((split.plus.matrix - plus).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((split.minus.matrix - minus).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("definite inputs leave one side empty") {
        const GridSpec grid = line_grid(16);
        const Eigen::MatrixXd a = random_symmetric(16, 21);
        const Eigen::MatrixXd psd = a * a.transpose();
        const auto pos = positive_parts(operator_from(psd, grid));
        CHECK(pos.minus.matrix.cwiseAbs().maxCoeff() <=
              1e-10 * psd.cwiseAbs().maxCoeff());
        const auto neg = positive_parts(operator_from(-psd, grid));
        CHECK(neg.plus.matrix.cwiseAbs().maxCoeff() <=
              1e-10 * psd.cwiseAbs().maxCoeff());
    }

    SUBCASE("split identity, positivity, and absolute sum on random draws") {
        const GridSpec grid = line_grid(64);
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            const Eigen::MatrixXd k = random_symmetric(64, 7000 + trial);
            const auto op = operator_from(k, grid);
            const auto split = positive_parts(op);
            const double scale = k.cwiseAbs().maxCoeff();
            CAPTURE(trial);

            CHECK((split.plus.matrix - split.minus.matrix - k)
                      .cwiseAbs()
                      .maxCoeff() <= 1e-10 * scale);

            for (const auto* part : {&split.plus, &split.minus}) {
                const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                    part->matrix);
                CHECK(es.eigenvalues().minCoeff() >= -1e-8 * scale * 64);
            }

            const auto abs_op = absolute_kernel(op);
            CHECK((split.plus.matrix + split.minus.matrix - abs_op.matrix)
                      .cwiseAbs()
                      .maxCoeff() <= 1e-8 * scale);
        }
    }
}

TEST_CASE("weighted spectral sums are preserved by the absolute kernel") {
    const GridSpec grid = line_grid(32);
    double observed_ratio = 0.0;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd k = random_bandlimited_kernel(grid, 9000 + trial);
        const auto abs_op = absolute_kernel(operator_from(k, grid));
        CAPTURE(trial);
        for (double s : {0.7, 1.0}) {
            const double sum_in = spectral_sum(k, grid, s);
            const double sum_out = spectral_sum(abs_op.matrix, grid, s);
            CHECK(sum_out == doctest::Approx(sum_in).epsilon(1e-8));
        }
        // Observed Sobolev stability constant of the absolute-value map.
        const double ratio = kernel_h_norm(abs_op.matrix, grid, 1.0) /
                             kernel_h_norm(k, grid, 1.0);
        observed_ratio = std::max(observed_ratio, ratio);
    }
    MESSAGE("observed H^1 stability constant: ", observed_ratio);
    CHECK(observed_ratio < 20.0);
    CHECK(observed_ratio >= 1.0 - 1e-9);
}

TEST_CASE("finite-rank truncation keeps the top modes and reports the tail") {
    const GridSpec grid = line_grid(64);
    const SeedCovariance seed = SeedCovariance::bump(1);
    const auto op = discretize(
        [&](const std::array<double, 3>& x, const std::array<double, 3>& y) {
            return layer_covariance_S(seed, 0.5, std::abs(x[0] - y[0]), 2.0,
                                      2.0);
        },
        grid);

    SUBCASE("full rank reproduces the input") {
        const auto report = finite_rank_truncate(op, 64);
        CHECK((report.truncated.matrix - op.matrix).cwiseAbs().maxCoeff() <=
              1e-12 * op.matrix.cwiseAbs().maxCoeff());
        CHECK(report.remainder_norm <= 1e-12);
    }

    SUBCASE("a rank-one kernel truncates exactly at rank one") {
        Eigen::VectorXd v(64);
        for (int i = 0; i < 64; ++i) v(i) = std::sin(0.2 * i) + 0.1;
        const auto rank1 = operator_from(v * v.transpose(), grid);
        const auto report = finite_rank_truncate(rank1, 1);
        CHECK(report.remainder_norm <=
              1e-10 * rank1.matrix.cwiseAbs().maxCoeff());
    }

    SUBCASE("the order-zero remainder equals the spectral tail") {
        const SpectralDecomposition dec = spectral_decomposition(op);
        const auto report = finite_rank_truncate(op, 8);
        double tail_sq = 0.0;
        for (Eigen::Index k = 8; k < 64; ++k)
            tail_sq += dec.eigenvalues(k) * dec.eigenvalues(k);
        CHECK(report.remainder_norm ==
              doctest::Approx(std::sqrt(tail_sq)).epsilon(1e-10));
    }

    SUBCASE("budget search finds the smallest sufficient rank") {
        const double at7 = finite_rank_truncate(op, 7).remainder_norm;
        const double at8 = finite_rank_truncate(op, 8).remainder_norm;
        REQUIRE(at8 < at7);
        const auto report =
            finite_rank_truncate(op, 0.5 * (at7 + at8), 0.0);
        CHECK(report.rank == 8);
        CHECK_THROWS_AS(finite_rank_truncate(op, 0.0, 0.0),
                        BudgetUnreachable);
        CHECK(finite_rank_truncate(op, 1e6, 0.0).rank == 0);
    }
}

TEST_CASE("windowed kernel differences split into PSD parts") {
    const GridSpec grid = line_grid(64);
    const SeedCovariance seed = SeedCovariance::bump(1);
    const auto c1 = discretize(
        [&](const std::array<double, 3>& x, const std::array<double, 3>& y) {
            return star_kernel(seed, std::abs(x[0] - y[0]), 2.0);
        },
        grid);
    const auto c2 = discretize(
        [&](const std::array<double, 3>& x, const std::array<double, 3>& y) {
            return star_kernel(seed.dilated(2.0), std::abs(x[0] - y[0]), 2.0);
        },
        grid);

    // Smooth plateau window: 1 on |x| <= 0.25, cosine falloff to 0 at 0.45.
    std::vector<double> window(64);
    for (int i = 0; i < 64; ++i) {
        const double r = std::abs(grid.point(i)[0]);
        if (r <= 0.25)
            window[static_cast<std::size_t>(i)] = 1.0;
        else if (r < 0.45) {
            const double t = (r - 0.25) / 0.2;
            window[static_cast<std::size_t>(i)] =
                0.5 * (1.0 + std::cos(kTau / 2.0 * t));
        } else
            window[static_cast<std::size_t>(i)] = 0.0;
    }

    SUBCASE("equal inputs produce vanishing parts") {
        const auto split = regular_difference_split(c1, c1, window, 1.5);
        CHECK(split.plus.matrix.cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(split.minus.matrix.cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("a PSD difference leaves the negative part empty") {
        Eigen::VectorXd v(64);
        for (int i = 0; i < 64; ++i) v(i) = std::cos(0.3 * i);
        auto raised = c1;
        raised.matrix += v * v.transpose();
        const auto split = regular_difference_split(raised, c1, window, 1.5);
        CHECK(split.minus.matrix.cwiseAbs().maxCoeff() <=
              1e-10 * split.plus.matrix.cwiseAbs().maxCoeff());
    }

    SUBCASE("dilated-seed example: identity, positivity, finite norms") {
        const auto split = regular_difference_split(c1, c2, window, 1.5);
        Eigen::MatrixXd target(64, 64);
        for (int i = 0; i < 64; ++i)
            for (int j = 0; j < 64; ++j)
                target(i, j) = window[static_cast<std::size_t>(i)] *
                               window[static_cast<std::size_t>(j)] *
                               (c1.matrix(i, j) - c2.matrix(i, j));
        const double scale = target.cwiseAbs().maxCoeff();
        CHECK((split.plus.matrix - split.minus.matrix - target)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-10 * scale);
        for (const auto* part : {&split.plus, &split.minus}) {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                part->matrix);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * scale * 64);
        }
        CHECK(split.plus_norm > 0.0);
        CHECK(split.minus_norm > 0.0);
        CHECK(split.norm_order == 1.5);
    }
}

TEST_CASE("coupling: marginals, pathwise difference, and complements") {
    const GridSpec grid = line_grid(2, 1.0);  // unit weights

    SUBCASE("identical marginals with empty parts give equal fields") {
        const Eigen::MatrixXd a = random_symmetric(2, 31);
        const Eigen::MatrixXd c = a * a.transpose();
        const auto zero = operator_from(Eigen::MatrixXd::Zero(2, 2), grid);
        const auto cop = operator_from(c, grid);
        const GaussianCoupling coupling = couple(cop, cop, zero, zero, 99);
        for (std::uint64_t r = 0; r < 20; ++r) {
            const CouplingSample s = coupling.sample(r);
            CHECK((s.x1 - s.common).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK((s.x2 - s.common).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK(s.g.cwiseAbs().maxCoeff() <= 1e-9);
        }
    }

    SUBCASE("two-site example validated against one million draws") {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
        const GaussianCoupling coupling =
            couple(operator_from(id, grid), operator_from(2.0 * id, grid),
                   operator_from(0.0 * id, grid), operator_from(id, grid),
                   2024);

        // Exact joint covariance of (X1, X2, G).
        const Eigen::MatrixXd joint = coupling.joint_covariance();
        Eigen::MatrixXd want(6, 6);
        want << 1, 0, 1, 0, 0, 0,   //
            0, 1, 0, 1, 0, 0,       //
            1, 0, 2, 0, -1, 0,      //
            0, 1, 0, 2, 0, -1,      //
            0, 0, -1, 0, 1, 0,      //
            0, 0, 0, -1, 0, 1;
        CHECK((joint - want).cwiseAbs().maxCoeff() <= 1e-10);

        const int draws = 1000000;
        Eigen::MatrixXd stacked(draws, 6);
        for (int r = 0; r < draws; ++r) {
            const CouplingSample s =
                coupling.sample(static_cast<std::uint64_t>(r));
            stacked(r, 0) = s.x1(0);
            stacked(r, 1) = s.x1(1);
            stacked(r, 2) = s.x2(0);
            stacked(r, 3) = s.x2(1);
            stacked(r, 4) = s.g(0);
            stacked(r, 5) = s.g(1);
        }
        const teststat::CovCheck check =
            teststat::compare_covariance(stacked, want);
        CAPTURE(check.max_z);
        CAPTURE(check.outlier_frac);
        CHECK(check.pass());
    }

    SUBCASE("windowed-difference pair satisfies all coupling contracts") {
        const GridSpec fine = line_grid(64);
        const SeedCovariance seed = SeedCovariance::bump(1);
        const auto c1 = discretize(
            [&](const std::array<double, 3>& x,
                const std::array<double, 3>& y) {
                return star_kernel(seed, std::abs(x[0] - y[0]), 2.0);
            },
            fine);
        const auto c2 = discretize(
            [&](const std::array<double, 3>& x,
                const std::array<double, 3>& y) {
                return star_kernel(seed.dilated(2.0), std::abs(x[0] - y[0]),
                                   2.0);
            },
            fine);
        std::vector<double> window(64, 1.0);
        const auto split = regular_difference_split(c1, c2, window, 1.5);

        // With the all-ones window the split difference is exactly C1 - C2,
        // so C1 + minus = C2 + plus and the coupling precondition holds.
        const GaussianCoupling coupling =
            couple(c1, c2, split.plus, split.minus, 555);

        const Eigen::Index n = 64;
        const Eigen::MatrixXd joint = coupling.joint_covariance();
        const double scale = std::max(1.0, c1.matrix.cwiseAbs().maxCoeff());
        CHECK((joint.block(0, 0, n, n) - c1.matrix).cwiseAbs().maxCoeff() <=
              1e-8 * scale);
        CHECK((joint.block(n, n, n, n) - c2.matrix).cwiseAbs().maxCoeff() <=
              1e-8 * scale);
        CHECK((coupling.complement_covariance_1() - split.minus.matrix)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8 * scale);
        CHECK((coupling.complement_covariance_2() - split.plus.matrix)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8 * scale);

        for (std::uint64_t r = 0; r < 10; ++r) {
            const CouplingSample s = coupling.sample(r);
            // G is the pathwise difference, and the "excursion to the
            // common field and back" cancels identically.
            CHECK((s.g - (s.x1 - s.x2)).cwiseAbs().maxCoeff() == 0.0);
            const Eigen::VectorXd cancel =
                s.x1 + (s.common - s.x1) - s.x2 - (s.common - s.x2);
            CHECK(cancel.cwiseAbs().maxCoeff() <= 1e-12);
        }

        // The difference covariance carries a cross correction beyond the
        // naive sum of the two parts whenever both parts are nonzero.
        const Eigen::MatrixXd naive = split.plus.matrix + split.minus.matrix;
        const Eigen::MatrixXd actual = coupling.difference_covariance();
        const Eigen::MatrixXd sigma = coupling.common_covariance();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
        Eigen::VectorXd inv = es.eigenvalues();
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            inv(i) = inv(i) > 1e-12 * es.eigenvalues().maxCoeff()
                         ? 1.0 / inv(i)
                         : 0.0;
        const Eigen::MatrixXd pinv =
            es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        const Eigen::MatrixXd cross_term =
            split.minus.matrix * pinv * split.plus.matrix;
        const Eigen::MatrixXd corrected =
            naive - cross_term - cross_term.transpose();
        CHECK((actual - corrected).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    }

    SUBCASE("inconsistent sums are rejected") {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
        CHECK_THROWS_AS(
            couple(operator_from(id, grid), operator_from(2.0 * id, grid),
                   operator_from(id, grid), operator_from(id, grid), 1),
            NotACoupling);
    }

    SUBCASE("negative conditional covariances are rejected") {
        Eigen::MatrixXd c1(2, 2), cgm(2, 2);
        c1 << 1.0, 2.0, 2.0, 1.0;    // indefinite marginal
        cgm << 3.0, -2.0, -2.0, 3.0; // PSD, sums with c1 to 4*I
        const Eigen::MatrixXd sigma = c1 + cgm;
        CHECK_THROWS_AS(
            couple(operator_from(c1, grid), operator_from(sigma, grid),
                   operator_from(Eigen::MatrixXd::Zero(2, 2), grid),
                   operator_from(cgm, grid), 1),
            ResidualNotPSD);
    }

    SUBCASE("draws are reproducible and realization-keyed") {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
        const GaussianCoupling coupling =
            couple(operator_from(id, grid), operator_from(2.0 * id, grid),
                   operator_from(0.0 * id, grid), operator_from(id, grid), 7);
        const CouplingSample a = coupling.sample(3);
        const CouplingSample b = coupling.sample(3);
        const CouplingSample c = coupling.sample(4);
        CHECK((a.x1 - b.x1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.x2 - b.x2).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.x1 - c.x1).cwiseAbs().maxCoeff() > 0.0);
        CHECK_FALSE(coupling.clipped());
    }
}
