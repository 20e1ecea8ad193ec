#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

#include "gmclab/grid.hpp"
#include "gmclab/seed_covariance.hpp"

namespace gmclab {

inline constexpr double kInfiniteLevel = std::numeric_limits<double>::infinity();

/// Scale-averaged kernel  K_t(x) = \int_0^t k(e^u |x|) du.
///
/// With t = +inf this is the scale-invariant kernel; it diverges at x = 0
/// (DivergentIntegral).  Tails beyond the support or decay horizon of the
/// seed are bounded analytically by decay_constant * e^{-a T} |x|^{-a} / a
/// and truncated once that bound drops below the quadrature tolerance.
double star_kernel(const SeedCovariance& seed, double r, double t_max);

/// Covariance of the rough layer at levels (t, t'):
///   \int_0^{min(t,t')} k(e^u |x - x'|) (1 - e^{-delta u}) du.
/// Accepts infinite levels when |x - x'| > 0 makes the integral converge.
double layer_covariance_L(const SeedCovariance& seed, double delta, double r,
                          double t, double t_prime);

/// Covariance of the smooth layer at levels (t, t'):
///   \int_0^{min(t,t')} k(e^u |x - x'|) e^{-delta u} du.
/// Converges for every r, including r = 0, even at infinite levels.
double layer_covariance_S(const SeedCovariance& seed, double delta, double r,
                          double t, double t_prime);

/// Covariance increments over a level window [s, t], used both by the
/// multiscale sampler and by quadrature-additivity checks:
///   \int_s^t k(e^u r) w(u) du  with the rough / smooth layer weights.
double layer_increment_L(const SeedCovariance& seed, double delta, double r,
                         double s, double t);
double layer_increment_S(const SeedCovariance& seed, double delta, double r,
                         double s, double t);

struct AnisotropyCurve {
    std::vector<double> radii;
    std::vector<double> values;   // \int_0^{log 2} k0(e^u r) du per radius
    double extrapolated_limit;    // Aitken-accelerated r -> 0 limit
};

/// One-octave scale average of a 1-d seed factor along a shrinking radius
/// sequence; the limit is log 2 regardless of the factor.
AnisotropyCurve anisotropy_limit(const SeedCovariance& k0,
                                 const std::vector<double>& radii);

struct DilationReport {
    double shift;           // a = g(0,0) - g0(0,0)
    double lambda;          // max(1, e^{-a})
    double adjusted_shift;  // a + log(lambda), always >= 0
};

/// Normalizing dilation: given the diagonal mismatch a between a target
/// remainder and the seed's own remainder, returns the seed dilation that
/// makes the mismatch nonnegative, using that dilating by lambda lowers the
/// seed remainder diagonal by exactly log(lambda).
DilationReport dilation_factor(double g_diag, double g0_diag);

/// Log-singular covariance  C(x, y) = log(1/|x-y|) + g(x, y)  with a
/// continuous remainder g.  On grids the diagonal uses the half-cell
/// regularization log(1/(h/2)) + g(x, x).
class LogKernel {
public:
    LogKernel(std::function<double(const std::array<double, 3>&,
                                   const std::array<double, 3>&)> remainder,
              int dim)
        : g_(std::move(remainder)), dim_(dim) {}

    int dimension() const { return dim_; }

    double remainder(const std::array<double, 3>& x,
                     const std::array<double, 3>& y) const {
        return g_(x, y);
    }

    /// Off-diagonal evaluation; x == y diverges by design.
    double operator()(const std::array<double, 3>& x,
                      const std::array<double, 3>& y) const;

    /// Covariance matrix over a grid with the lattice diagonal rule.
    Eigen::MatrixXd matrix(const GridSpec& grid) const;

private:
    std::function<double(const std::array<double, 3>&, const std::array<double, 3>&)> g_;
    int dim_;
};

/// Remainder of the seed's own scale-invariant kernel:
///   g0(r) = K_inf(r) - log(1/r),  continuous through r = 0 with
///   g0(0) = \int_0^1 (k(v)-1)/v dv + \int_1^inf k(v)/v dv.
double star_remainder(const SeedCovariance& seed, double r);
double star_remainder_diag(const SeedCovariance& seed);

} // namespace gmclab
