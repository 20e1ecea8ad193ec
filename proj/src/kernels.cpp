#include "gmclab/kernels.hpp"

#include <cmath>

#include "gmclab/errors.hpp"
#include "gmclab/quadrature.hpp"

namespace gmclab {

namespace {

/// Upper integration limit for \int_0^T k(e^u r) w(u) du so that the
/// neglected tail is provably below tol.  `extra_decay` is the exponential
/// rate of the weight w (0 for the L-weight, delta for the S-weight).
double tail_horizon(const SeedCovariance& seed, double r, double extra_decay,
                    double tol) {
    if (seed.compactly_supported()) {
        if (r <= 0.0) {
            if (extra_decay <= 0.0)
                throw DivergentIntegral("scale integral at zero separation");
            // |k| <= 1: tail below T is bounded by e^{-delta T}/delta.
            return std::log(1.0 / (extra_decay * tol)) / extra_decay;
        }
        return std::max(0.0, std::log(seed.support_radius() / r));
    }
    const double a = seed.decay_exponent();
    const double m = seed.decay_constant();
    const double rate = a + extra_decay;
    double horizon = std::numeric_limits<double>::infinity();
    if (r > 0.0) {
        // tail(T) <= M r^-a e^{-(a+delta) T} / (a+delta)
        const double t1 =
            (std::log(m) - a * std::log(r) - std::log(rate * tol)) / rate;
        horizon = std::max(0.0, t1);
    } else if (extra_decay <= 0.0) {
        throw DivergentIntegral("scale integral at zero separation");
    }
    if (extra_decay > 0.0) {
        // |k| <= 1 alone: tail(T) <= e^{-delta T}/delta, valid for every r.
        const double t2 = std::log(1.0 / (extra_decay * tol)) / extra_decay;
        horizon = std::min(horizon, std::max(0.0, t2));
    }
    return horizon;
}

std::vector<double> kink_breaks(const SeedCovariance& seed, double r) {
    std::vector<double> breaks;
    if (r <= 0.0) return breaks;
    for (double kr : seed.kink_radii()) {
        if (kr > r) breaks.push_back(std::log(kr / r));
    }
    return breaks;
}

double scale_integral(const SeedCovariance& seed, double r, double t_min,
                      double t_max, double extra_decay) {
    r = std::abs(r);
    if (!(t_max > t_min)) return 0.0;
    double upper = t_max;
    if (std::isinf(upper)) {
        // The analytic tail bound can be achieved (e.g. at r = 0), so aim an
        // order of magnitude below the quadrature tolerance.
        upper = std::max(t_min, tail_horizon(seed, r, extra_decay, 0.01 * kQuadTol));
    } else if (r > 0.0 && seed.compactly_supported()) {
        // Exact truncation: the integrand vanishes once e^u r leaves the support.
        upper = std::min(upper,
                         std::max(t_min, std::log(seed.support_radius() / r)));
    }
    if (!(upper > t_min)) return 0.0;
    const auto integrand = [&](double u) {
        const double base = seed(std::exp(u) * r);
        if (extra_decay > 0.0) return base * std::exp(-extra_decay * u);
        return base;
    };
    return integrate_split(integrand, t_min, upper, kink_breaks(seed, r));
}

double layer_integral(const SeedCovariance& seed, double delta, double r,
                      double lo, double t, double t_prime, bool rough) {
    if (!(delta > 0.0)) throw Error("delta must be positive");
    if (t < 0.0 || t_prime < 0.0 || lo < 0.0)
        throw Error("levels must be nonnegative");
    const double upto = std::min(t, t_prime);
    if (rough) {
        // weight 1 - e^{-delta u}: split into the two exponential pieces so
        // each gets its own certified tail horizon.
        const double full = scale_integral(seed, r, lo, upto, 0.0);
        const double smooth = scale_integral(seed, r, lo, upto, delta);
        return full - smooth;
    }
    return scale_integral(seed, r, lo, upto, delta);
}

} // namespace

double star_kernel(const SeedCovariance& seed, double r, double t_max) {
    if (t_max < 0.0) throw Error("t_max must be nonnegative");
    return scale_integral(seed, r, 0.0, t_max, 0.0);
}

double layer_covariance_L(const SeedCovariance& seed, double delta, double r,
                          double t, double t_prime) {
    return layer_integral(seed, delta, r, 0.0, t, t_prime, /*rough=*/true);
}

double layer_covariance_S(const SeedCovariance& seed, double delta, double r,
                          double t, double t_prime) {
    return layer_integral(seed, delta, r, 0.0, t, t_prime, /*rough=*/false);
}

double layer_increment_L(const SeedCovariance& seed, double delta, double r,
                         double s, double t) {
    return layer_integral(seed, delta, r, s, t, t, /*rough=*/true);
}

double layer_increment_S(const SeedCovariance& seed, double delta, double r,
                         double s, double t) {
    return layer_integral(seed, delta, r, s, t, t, /*rough=*/false);
}

AnisotropyCurve anisotropy_limit(const SeedCovariance& k0,
                                 const std::vector<double>& radii) {
    if (k0.dimension() != 1) throw Error("anisotropy factor must be 1-d");
    AnisotropyCurve curve;
    curve.radii = radii;
    const double log2 = std::log(2.0);
    for (double r : radii) {
        const double value = integrate_split(
            [&](double u) { return k0(std::exp(u) * r); }, 0.0, log2,
            kink_breaks(k0, r));
        curve.values.push_back(value);
    }
    // Aitken delta-squared on the last three points when available; the
    // curve approaches log 2 at a seed-dependent algebraic rate, which the
    // acceleration removes for geometric radius sequences.
    const auto& v = curve.values;
    if (v.size() >= 3) {
        const double x0 = v[v.size() - 3], x1 = v[v.size() - 2], x2 = v[v.size() - 1];
        const double denom = x2 - 2.0 * x1 + x0;
        curve.extrapolated_limit =
            std::abs(denom) > 1e-14 ? x2 - (x2 - x1) * (x2 - x1) / denom : x2;
    } else if (!v.empty()) {
        curve.extrapolated_limit = v.back();
    } else {
        curve.extrapolated_limit = 0.0;
    }
    return curve;
}

DilationReport dilation_factor(double g_diag, double g0_diag) {
    DilationReport report;
    report.shift = g_diag - g0_diag;
    report.lambda = std::max(1.0, std::exp(-report.shift));
    report.adjusted_shift = report.shift + std::log(report.lambda);
    if (report.adjusted_shift < -1e-12)
        throw Error("dilation failed to make the diagonal shift nonnegative");
    report.adjusted_shift = std::max(0.0, report.adjusted_shift);
    return report;
}

double LogKernel::operator()(const std::array<double, 3>& x,
                             const std::array<double, 3>& y) const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    const double r = std::sqrt(s);
    if (r <= 0.0) throw DivergentIntegral("log kernel on the diagonal");
    return std::log(1.0 / r) + g_(x, y);
}

Eigen::MatrixXd LogKernel::matrix(const GridSpec& grid) const {
    const auto n = grid.size();
    const double h = grid.spacing();
    Eigen::MatrixXd c(n, n);
    for (std::int64_t i = 0; i < n; ++i) {
        const auto xi = grid.point(i);
        c(i, i) = std::log(2.0 / h) + g_(xi, xi);
        for (std::int64_t j = i + 1; j < n; ++j) {
            const auto xj = grid.point(j);
            const double value = (*this)(xi, xj);
            c(i, j) = value;
            c(j, i) = value;
        }
    }
    return c;
}

double star_remainder(const SeedCovariance& seed, double r) {
    r = std::abs(r);
    if (r == 0.0) return star_remainder_diag(seed);
    return star_kernel(seed, r, kInfiniteLevel) + std::log(r);
}

double star_remainder_diag(const SeedCovariance& seed) {
    // Both pieces are computed in logarithmic radius w = log v, which turns
    // 1/v dv into dw and keeps the quadrature ranges short and well scaled.
    std::vector<double> log_kinks;
    for (double kr : seed.kink_radii())
        if (kr > 0.0) log_kinks.push_back(std::log(kr));
    // \int_0^1 (k(v) - 1)/v dv; the integrand k(e^w) - 1 decays like e^{2w}
    // towards -inf, so truncating at -35 is far below tolerance.
    const double core = integrate_split(
        [&](double w) { return seed(std::exp(w)) - 1.0; }, -35.0, 0.0,
        log_kinks);
    double tail = 0.0;
    if (!seed.compactly_supported() || seed.support_radius() > 1.0) {
        const double a = seed.decay_exponent();
        const double m = seed.decay_constant();
        // \int_1^inf k(v)/v dv with certified truncation via the decay bound:
        // remainder beyond V is <= M V^-a / a.
        double upper = seed.support_radius();
        if (std::isinf(upper))
            upper = std::pow(m / (a * kQuadTol), 1.0 / a);
        tail = integrate_split([&](double w) { return seed(std::exp(w)); }, 0.0,
                               std::log(upper), log_kinks);
    }
    return core + tail;
}

} // namespace gmclab
