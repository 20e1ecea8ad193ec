#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace gmclab {

/// Radial seed covariance k used to build scale-invariant kernels.
///
/// Normalization contract: k(0) = 1 exactly, |k| <= 1 everywhere, and the
/// recorded decay bound |k(r)| <= decay_constant * r^-decay_exponent holds
/// for r >= 1 (trivially, with a zero tail, when the support is compact).
/// Positive semi-definiteness is a property of the builtin constructions
/// (self-convolutions and the explicit comparison seed) and is checked by
/// the test suite on grids rather than assumed from user input.
class SeedCovariance {
public:
    /// Evaluates the radial profile k(r).
    double operator()(double r) const;

    int dimension() const;
    double decay_exponent() const;
    double decay_constant() const;

    /// Radius of the support ball, +inf when the support is unbounded.
    double support_radius() const;
    bool compactly_supported() const;

    /// Radii where the profile is not smooth (quadrature split points).
    const std::vector<double>& kink_radii() const;

    /// Radial Fourier transform \hat k(|xi|) >= 0, when known.
    bool has_fourier() const;
    double fourier(double rho) const;

    /// Real-space factor h with h * h = k (convolution square root), when
    /// known.  For self-convolved seeds this is the convolved profile
    /// itself; its support radius is half the seed's.
    bool has_factor() const;
    double factor(double r) const;
    double factor_support() const;

    std::string name() const;

    /// The seed r -> k(lambda r); lambda >= 1 keeps the decay bound valid.
    SeedCovariance dilated(double lambda) const;

    /// Normalized self-convolution of the standard smooth bump supported in
    /// B(0, 1/2); support B(0,1), nonnegative Fourier transform.  Default
    /// seed for every experiment that needs compact support.
    static SeedCovariance bump(int dim);

    /// Comparison seed (1 + r^2)^-((d+1)/2); unbounded support, explicit
    /// Fourier transform proportional to exp(-2 pi |xi|).
    static SeedCovariance poisson(int dim);

    /// One-dimensional tent 1 - |r| on [-1, 1]:
    /// the self-convolution of an indicator, hence PSD.  Used as the 1-d
    /// factor in anisotropic product constructions.
    static SeedCovariance triangle();

    /// Looks a builtin seed up by name ("bump" | "poisson" | "triangle").
    static SeedCovariance by_name(const std::string& name, int dim);

    struct Impl;
    explicit SeedCovariance(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<const Impl> impl_;
};

} // namespace gmclab
