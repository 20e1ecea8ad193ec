#include "gmclab/seed_covariance.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "gmclab/errors.hpp"
#include "gmclab/quadrature.hpp"

namespace gmclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846264338327950288;

/// Smooth bump profile supported in B(0, 1/2), not normalized.
double bump_profile(double r) {
    const double q = 2.0 * r;
    if (q >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - q * q));
}

/// Fixed-order Gauss-Legendre on [a, b].  The convolution integrands below
/// are C-infinity with compact support, so a fixed high order converges
/// spectrally and keeps the 2049-point table construction cheap.
template <class F>
double gauss_legendre(const F& f, double a, double b) {
    using rule = boost::math::quadrature::gauss<double, 96>;
    return rule::integrate(f, a, b);
}

/// (phi * phi)(r) in dimension d for the radial profile above.
/// Smooth, compactly supported in B(0, 1).
double bump_self_convolution(double r, int d) {
    if (r >= 1.0) return 0.0;
    switch (d) {
        case 1:
            return gauss_legendre(
                [r](double s) {
                    return bump_profile(std::abs(s)) * bump_profile(std::abs(r - s));
                },
                -0.5, 0.5);
        case 2:
            return gauss_legendre(
                [r](double s) {
                    if (s <= 0.0) return 0.0;
                    const double inner = gauss_legendre(
                        [r, s](double theta) {
                            const double dist2 =
                                r * r + s * s - 2.0 * r * s * std::cos(theta);
                            return bump_profile(std::sqrt(std::max(0.0, dist2)));
                        },
                        0.0, 2.0 * kPi);
                    return bump_profile(s) * s * inner;
                },
                0.0, 0.5);
        case 3:
            return gauss_legendre(
                [r](double s) {
                    if (s <= 0.0) return 0.0;
                    const double inner = gauss_legendre(
                        [r, s](double theta) {
                            const double dist2 =
                                r * r + s * s - 2.0 * r * s * std::cos(theta);
                            return bump_profile(std::sqrt(std::max(0.0, dist2))) *
                                   std::sin(theta);
                        },
                        0.0, kPi);
                    return 2.0 * kPi * bump_profile(s) * s * s * inner;
                },
                0.0, 0.5);
        default:
            throw Error("seed dimension must be 1, 2, or 3");
    }
}

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

/// Dense table of the normalized bump self-convolution on [0, 1].
struct BumpTable {
    double norm; // (phi*phi)(0), the normalizer
    Spline spline;

    explicit BumpTable(int d)
        : norm(bump_self_convolution(0.0, d)), spline(make_spline(d, norm)) {}

    static constexpr int kPoints = 2049;
    static constexpr double kStep = 1.0 / (kPoints - 1);

    static Spline make_spline(int d, double norm) {
        std::vector<double> v(kPoints);
        for (int i = 0; i < kPoints; ++i)
            v[i] = bump_self_convolution(i * kStep, d) / norm;
        // Force the endpoints exactly: k(0) = 1, k(1) = 0.
        v[0] = 1.0;
        v[kPoints - 1] = 0.0;
        return Spline(v.data(), v.size(), 0.0, kStep);
    }
};

const BumpTable& bump_table(int d) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<BumpTable>> tables;
    std::lock_guard<std::mutex> lock(mu);
    auto it = tables.find(d);
    if (it == tables.end())
        it = tables.emplace(d, std::make_unique<BumpTable>(d)).first;
    return *it->second;
}

/// Surface area of the unit d-sphere embedded in R^(d+1).
double sphere_area(int d) {
    return 2.0 * std::pow(kPi, 0.5 * (d + 1)) / std::tgamma(0.5 * (d + 1));
}

} // namespace

struct SeedCovariance::Impl {
    std::function<double(double)> profile;
    int dim = 1;
    double decay_exponent = 2.0;
    double decay_constant = 1.0;
    double support = kInf;
    std::vector<double> kinks;
    std::function<double(double)> fourier;      // may be empty
    std::function<double(double)> factor;       // may be empty
    double factor_support = kInf;
    std::string name;
};

double SeedCovariance::operator()(double r) const { return impl_->profile(std::abs(r)); }
int SeedCovariance::dimension() const { return impl_->dim; }
double SeedCovariance::decay_exponent() const { return impl_->decay_exponent; }
double SeedCovariance::decay_constant() const { return impl_->decay_constant; }
double SeedCovariance::support_radius() const { return impl_->support; }
bool SeedCovariance::compactly_supported() const { return std::isfinite(impl_->support); }
const std::vector<double>& SeedCovariance::kink_radii() const { return impl_->kinks; }
bool SeedCovariance::has_fourier() const { return static_cast<bool>(impl_->fourier); }
double SeedCovariance::fourier(double rho) const {
    if (!has_fourier()) throw MissingFourierData("seed " + impl_->name);
    return impl_->fourier(std::abs(rho));
}
bool SeedCovariance::has_factor() const { return static_cast<bool>(impl_->factor); }
double SeedCovariance::factor(double r) const {
    if (!has_factor()) throw MissingFactorData("seed " + impl_->name);
    return impl_->factor(std::abs(r));
}
double SeedCovariance::factor_support() const { return impl_->factor_support; }
std::string SeedCovariance::name() const { return impl_->name; }

SeedCovariance SeedCovariance::dilated(double lambda) const {
    if (!(lambda >= 1.0))
        throw Error("dilation factor must be >= 1, got " + std::to_string(lambda));
    if (lambda == 1.0) return *this;
    auto base = impl_;
    auto impl = std::make_shared<Impl>();
    impl->profile = [base, lambda](double r) { return base->profile(lambda * r); };
    impl->dim = base->dim;
    impl->decay_exponent = base->decay_exponent;
    impl->decay_constant = base->decay_constant * std::pow(lambda, -base->decay_exponent);
    impl->support = base->support / lambda;
    for (double k : base->kinks) impl->kinks.push_back(k / lambda);
    if (base->fourier) {
        const int d = base->dim;
        impl->fourier = [base, lambda, d](double rho) {
            return std::pow(lambda, -d) * base->fourier(rho / lambda);
        };
    }
    if (base->factor) {
        const int d = base->dim;
        impl->factor = [base, lambda, d](double r) {
            return std::pow(lambda, 0.5 * d) * base->factor(lambda * r);
        };
        impl->factor_support = base->factor_support / lambda;
    }
    impl->name = base->name + "(dilated x" + std::to_string(lambda) + ")";
    return SeedCovariance(std::move(impl));
}

SeedCovariance SeedCovariance::bump(int dim) {
    const BumpTable& table = bump_table(dim);
    auto impl = std::make_shared<Impl>();
    impl->profile = [&table](double r) {
        if (r <= 0.0) return 1.0;
        if (r >= 1.0) return 0.0;
        return std::min(1.0, std::max(0.0, table.spline(r)));
    };
    impl->dim = dim;
    impl->decay_exponent = static_cast<double>(dim + 1);
    impl->decay_constant = 1.0;
    impl->support = 1.0;
    impl->kinks = {1.0};
    const double norm = table.norm;
    impl->factor = [norm](double r) { return bump_profile(r) / std::sqrt(norm); };
    impl->factor_support = 0.5;
    impl->name = "bump";
    return SeedCovariance(std::move(impl));
}

SeedCovariance SeedCovariance::poisson(int dim) {
    auto impl = std::make_shared<Impl>();
    const double power = 0.5 * (dim + 1);
    impl->profile = [power](double r) { return std::pow(1.0 + r * r, -power); };
    impl->dim = dim;
    impl->decay_exponent = static_cast<double>(dim + 1);
    impl->decay_constant = 1.0;
    impl->support = kInf;
    const double area = sphere_area(dim);
    impl->fourier = [area](double rho) {
        return 0.5 * area * std::exp(-2.0 * kPi * rho);
    };
    // Real-space convolution square root: sqrt(area/2) times the inverse
    // transform of exp(-pi |xi|), which is the half-scale Poisson kernel
    // (2/area) * (1/2) / (1/4 + r^2)^((d+1)/2).
    impl->factor = [area, power](double r) {
        return std::sqrt(2.0 / area) * 0.5 * std::pow(0.25 + r * r, -power);
    };
    impl->factor_support = kInf;
    impl->name = "poisson";
    return SeedCovariance(std::move(impl));
}

SeedCovariance SeedCovariance::triangle() {
    auto impl = std::make_shared<Impl>();
    impl->profile = [](double r) { return r >= 1.0 ? 0.0 : 1.0 - r; };
    impl->dim = 1;
    impl->decay_exponent = 2.0;
    impl->decay_constant = 1.0;
    impl->support = 1.0;
    impl->kinks = {1.0};
    impl->fourier = [](double rho) {
        if (rho == 0.0) return 1.0;
        const double s = std::sin(kPi * rho) / (kPi * rho);
        return s * s;
    };
    impl->factor = [](double r) { return r <= 0.5 ? 1.0 : 0.0; };
    impl->factor_support = 0.5;
    impl->name = "triangle";
    return SeedCovariance(std::move(impl));
}

SeedCovariance SeedCovariance::by_name(const std::string& name, int dim) {
    if (name == "bump") return bump(dim);
    if (name == "poisson") return poisson(dim);
    if (name == "triangle") {
        if (dim != 1) throw ConfigError("triangle seed is one-dimensional");
        return triangle();
    }
    throw ConfigError("unknown seed covariance '" + name + "'");
}

} // namespace gmclab
