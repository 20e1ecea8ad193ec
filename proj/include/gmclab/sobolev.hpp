#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "gmclab/seed_covariance.hpp"

namespace gmclab {

/// Samples of a function on a uniform cell-centered lattice over the torus
/// of the cube [-side/2, side/2)^dim (dim is the full number of axes: a
/// kernel on a d-dimensional box lives on a 2d-dimensional torus here).
/// Row-major flattened storage, n cells per axis; the cell-center coordinate
/// along an axis is  -side/2 + (i + 1/2) side/n.
struct PeriodicGridFunction {
    int dim = 1;
    int n = 1;
    double side = 1.0;
    std::vector<std::complex<double>> values;

    double spacing() const { return side / n; }
    std::int64_t size() const {
        std::int64_t s = 1;
        for (int a = 0; a < dim; ++a) s *= n;
        return s;
    }
    double coordinate(int index_1d) const {
        return -0.5 * side + (index_1d + 0.5) * spacing();
    }
    /// Per-axis indices of a flattened index.
    std::vector<int> unflatten(std::int64_t flat) const {
        std::vector<int> idx(dim);
        for (int a = dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % n);
            flat /= n;
        }
        return idx;
    }
    /// Fills a function of the true coordinates into the lattice.
    static PeriodicGridFunction sample(
        int dim, int n, double side,
        const std::function<std::complex<double>(const std::vector<double>&)>& f);
};

/// Discrete Fourier coefficients with the integral normalization
///   fhat(xi) = h^dim sum_x f(x) e^{-2 pi i xi . x},  xi in Z^dim / side,
/// indexed like the input with frequencies folded to [-n/2, n/2).
std::vector<std::complex<double>> fourier_coefficients(const PeriodicGridFunction& f);

/// Frequency vector magnitude-squared for flattened index `flat`.
double frequency_norm_sq(const PeriodicGridFunction& f, std::int64_t flat);

/// Discrete Sobolev norm of order s:
///   ( side^-dim sum_xi (1 + |xi|^2)^s |fhat(xi)|^2 )^(1/2).
/// At s = 0 this is the lattice L2 norm (discrete Parseval).
double h_s_norm(const PeriodicGridFunction& f, double s);

struct LocalNormReport {
    double norm = 0.0;
    bool window_warning = false; // set when the window touches the boundary
};

/// H^s norm of the windowed function psi * f, zero-extended from its cube to
/// a torus of twice the side.  Throws WindowNotInterior when the window does
/// not vanish on the boundary ring of the cube.
LocalNormReport local_h_s_norm(const PeriodicGridFunction& f,
                               const std::vector<double>& window, double s);

struct BilinearBoundReport {
    double pairing = 0.0;     // |h^2dim sum_{x,y} K(x,y) phi(x) phi(y)|
    double bound = 0.0;       // ||K||_{H^s} * ||phi||^2_{H^{-s/2}}
    double slack = 0.0;       // bound - pairing  (>= 0 when the bound holds)
};

/// Checks |<K phi, phi>| <= ||K||_{H^s(2d)} ||phi||^2_{H^{-s/2}(d)} on the
/// lattice; K lives on the 2d-dimensional torus, phi on the d-dimensional one.
BilinearBoundReport bilinear_bound_check(const PeriodicGridFunction& kernel,
                                         const PeriodicGridFunction& phi,
                                         double s);

struct FourierLowerBoundReport {
    double constant = 0.0;        // largest c with Hhat >= c (1+|xi|)^{-d-delta}
    double min_transform = 0.0;   // smallest Hhat value seen
    std::vector<double> abscissae; // |xi| per checked frequency (diagnostic)
    std::vector<double> ratios;    // Hhat(xi) (1+|xi|)^{d+delta}
};

/// Transform-side positivity of the smooth-layer covariance at infinite
/// level: H(x) = \int_0^inf k(e^u x) e^{-delta u} du has Fourier transform
/// bounded below by c (1+|xi|)^{-d-delta}.  Computed on a node lattice of n
/// points per axis (n even) over [-side/2, side/2)^d; requires the seed's
/// support to fit inside (no wrap-around).  Throws NonPositiveTransform if
/// any coefficient is significantly negative.
FourierLowerBoundReport fourier_lower_bound_check(const SeedCovariance& seed,
                                                  double delta, int n,
                                                  double side);

struct RescaleDecayReport {
    std::vector<double> epsilons;
    std::vector<double> norms;    // ||psi(./eps) F||_{H^{d+delta}} per eps
    bool origin_warning = false;  // F(0) was not zero
};

/// Norm decay under window shrinking: F lives on the torus of a cube
/// centered at the origin, psi is a radial window profile supported in
/// [0, 1).  For each epsilon the windowed sample psi(|x|/eps) F(x) is
/// measured in H^{d_plus_delta}; throws UnderResolved when the window
/// support spans fewer than `min_cells` lattice cells.
RescaleDecayReport rescale_decay_curve(
    const PeriodicGridFunction& f,
    const std::function<double(double)>& window_profile, // psi on [0,1)
    double d_plus_delta, const std::vector<double>& epsilons,
    int min_cells = 16);

} // namespace gmclab
