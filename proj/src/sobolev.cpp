#include "gmclab/sobolev.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <vector>

#include "gmclab/errors.hpp"
#include "gmclab/kernels.hpp"

namespace gmclab {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// FFTW's planner is not thread-safe; plan creation/destruction is serialized.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> run_dft(const PeriodicGridFunction& f) {
    const std::int64_t total = f.size();
    fftw_complex* in = fftw_alloc_complex(static_cast<std::size_t>(total));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) {
        in[i][0] = f.values[static_cast<std::size_t>(i)].real();
        in[i][1] = f.values[static_cast<std::size_t>(i)].imag();
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        std::vector<int> dims(static_cast<std::size_t>(f.dim), f.n);
        plan = fftw_plan_dft(f.dim, dims.data(), in, out, FFTW_FORWARD,
                             FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<std::complex<double>> result(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i)
        result[static_cast<std::size_t>(i)] = {out[i][0], out[i][1]};
    fftw_free(in);
    fftw_free(out);
    return result;
}

int signed_frequency(int k, int n) { return k < (n + 1) / 2 ? k : k - n; }

} // namespace

PeriodicGridFunction PeriodicGridFunction::sample(
    int dim, int n, double side,
    const std::function<std::complex<double>(const std::vector<double>&)>& f) {
    PeriodicGridFunction g;
    g.dim = dim;
    g.n = n;
    g.side = side;
    g.values.resize(static_cast<std::size_t>(g.size()));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (std::int64_t flat = 0; flat < g.size(); ++flat) {
        std::int64_t rem = flat;
        for (int a = dim - 1; a >= 0; --a) {
            x[static_cast<std::size_t>(a)] =
                g.coordinate(static_cast<int>(rem % n));
            rem /= n;
        }
        g.values[static_cast<std::size_t>(flat)] = f(x);
    }
    return g;
}

std::vector<std::complex<double>> fourier_coefficients(
    const PeriodicGridFunction& f) {
    if (f.values.size() != static_cast<std::size_t>(f.size()))
        throw ConfigError("grid value count does not match dim/n");
    std::vector<std::complex<double>> coeffs = run_dft(f);
    // The raw DFT indexes samples by cell number j; the coefficients below
    // correspond to the actual cell-center coordinates, which differ from
    // j*h by the offset h/2 - side/2.  That offset contributes a per-axis
    // phase exp(i pi m (1 - 1/n)) for signed frequency m.
    const double hd = std::pow(f.spacing(), f.dim);
    std::vector<std::complex<double>> axis_phase(static_cast<std::size_t>(f.n));
    for (int k = 0; k < f.n; ++k) {
        const int m = signed_frequency(k, f.n);
        axis_phase[static_cast<std::size_t>(k)] =
            std::polar(1.0, kPi * m * (1.0 - 1.0 / f.n));
    }
    for (std::int64_t flat = 0; flat < f.size(); ++flat) {
        std::complex<double> factor(hd, 0.0);
        std::int64_t rem = flat;
        for (int a = 0; a < f.dim; ++a) {
            factor *= axis_phase[static_cast<std::size_t>(rem % f.n)];
            rem /= f.n;
        }
        coeffs[static_cast<std::size_t>(flat)] *= factor;
    }
    return coeffs;
}

double frequency_norm_sq(const PeriodicGridFunction& f, std::int64_t flat) {
    double sum = 0.0;
    std::int64_t rem = flat;
    for (int a = 0; a < f.dim; ++a) {
        const int m = signed_frequency(static_cast<int>(rem % f.n), f.n);
        rem /= f.n;
        const double xi = m / f.side;
        sum += xi * xi;
    }
    return sum;
}

double h_s_norm(const PeriodicGridFunction& f, double s) {
    const std::vector<std::complex<double>> coeffs = fourier_coefficients(f);
    double sum = 0.0;
    for (std::int64_t flat = 0; flat < f.size(); ++flat) {
        const double w = std::pow(1.0 + frequency_norm_sq(f, flat), s);
        sum += w * std::norm(coeffs[static_cast<std::size_t>(flat)]);
    }
    return std::sqrt(sum / std::pow(f.side, f.dim));
}

LocalNormReport local_h_s_norm(const PeriodicGridFunction& f,
                               const std::vector<double>& window, double s) {
    if (window.size() != static_cast<std::size_t>(f.size()))
        throw ConfigError("window size does not match the grid");
    double window_max = 0.0;
    for (double w : window) window_max = std::max(window_max, std::abs(w));
    double ring_max = 0.0;
    for (std::int64_t flat = 0; flat < f.size(); ++flat) {
        std::int64_t rem = flat;
        bool on_ring = false;
        for (int a = 0; a < f.dim; ++a) {
            const int idx = static_cast<int>(rem % f.n);
            rem /= f.n;
            if (idx == 0 || idx == f.n - 1) on_ring = true;
        }
        if (on_ring)
            ring_max = std::max(
                ring_max, std::abs(window[static_cast<std::size_t>(flat)]));
    }
    LocalNormReport report;
    if (window_max > 0.0 && ring_max > 1e-9 * window_max) {
        std::ostringstream msg;
        msg << "window does not vanish at the cube boundary (ring max "
            << ring_max << ", window max " << window_max << ")";
        throw WindowNotInterior(msg.str());
    }
    report.window_warning = ring_max > 0.0;

    // Zero-extend window*f to a torus of twice the side; the placement
    // offset only shifts Fourier phases and leaves the norm unchanged.
    PeriodicGridFunction big;
    big.dim = f.dim;
    big.n = 2 * f.n;
    big.side = 2.0 * f.side;
    big.values.assign(static_cast<std::size_t>(big.size()), {0.0, 0.0});
    const int offset = f.n / 2;
    for (std::int64_t flat = 0; flat < f.size(); ++flat) {
        std::int64_t rem = flat;
        std::int64_t big_flat = 0;
        std::int64_t stride = 1;
        for (int a = 0; a < f.dim; ++a) {
            const int idx = static_cast<int>(rem % f.n);
            rem /= f.n;
            big_flat += stride * (idx + offset);
            stride *= big.n;
        }
        big.values[static_cast<std::size_t>(big_flat)] =
            window[static_cast<std::size_t>(flat)] *
            f.values[static_cast<std::size_t>(flat)];
    }
    report.norm = h_s_norm(big, s);
    return report;
}

BilinearBoundReport bilinear_bound_check(const PeriodicGridFunction& kernel,
                                         const PeriodicGridFunction& phi,
                                         double s) {
    if (kernel.dim != 2 * phi.dim)
        throw ConfigError("kernel must live on the doubled-dimension torus");
    if (kernel.n != phi.n ||
        std::abs(kernel.side - phi.side) > 1e-12 * std::abs(phi.side))
        throw ConfigError("kernel and test function grids do not match");
    const std::int64_t np = phi.size();
    std::complex<double> acc(0.0, 0.0);
    for (std::int64_t i = 0; i < np; ++i) {
        std::complex<double> row(0.0, 0.0);
        for (std::int64_t j = 0; j < np; ++j)
            row += kernel.values[static_cast<std::size_t>(i * np + j)] *
                   phi.values[static_cast<std::size_t>(j)];
        acc += row * phi.values[static_cast<std::size_t>(i)];
    }
    BilinearBoundReport report;
    report.pairing = std::abs(acc) * std::pow(phi.spacing(), 2 * phi.dim);
    const double phi_norm = h_s_norm(phi, -0.5 * s);
    report.bound = h_s_norm(kernel, s) * phi_norm * phi_norm;
    report.slack = report.bound - report.pairing;
    return report;
}

FourierLowerBoundReport fourier_lower_bound_check(const SeedCovariance& seed,
                                                  double delta, int n,
                                                  double side) {
    const int d = seed.dimension();
    if (delta <= 0.0) throw ConfigError("smoothness split rate must be > 0");
    if (n % 2 != 0) throw ConfigError("transform check needs an even grid size");
    if (!seed.compactly_supported())
        throw ConfigError(
            "transform lower bound needs a compactly supported seed "
            "(periodization would wrap otherwise)");
    if (side < 2.0 * seed.support_radius())
        throw ConfigError(
            "cube side must cover twice the seed support to avoid wrap-around");

    // H(x) = smooth-layer covariance at infinite level; radial, so cache by
    // radius (symmetric nodes reproduce radii bit-for-bit).  Samples sit on
    // the node lattice x = j h - side/2: for even n the aliased copies of
    // the transform then add with positive sign, so each discrete
    // coefficient dominates the corresponding continuum transform value.
    const double h = side / n;
    std::map<double, double> by_radius;
    PeriodicGridFunction grid;
    grid.dim = d;
    grid.n = n;
    grid.side = side;
    grid.values.resize(static_cast<std::size_t>(grid.size()));
    for (std::int64_t flat = 0; flat < grid.size(); ++flat) {
        std::int64_t rem = flat;
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double c = static_cast<double>(rem % n) * h - 0.5 * side;
            rem /= n;
            r2 += c * c;
        }
        const double r = std::sqrt(r2);
        auto it = by_radius.find(r);
        if (it == by_radius.end()) {
            const double v = layer_covariance_S(seed, delta, r, kInfiniteLevel,
                                                kInfiniteLevel);
            it = by_radius.emplace(r, v).first;
        }
        grid.values[static_cast<std::size_t>(flat)] = {it->second, 0.0};
    }

    // Coefficient at signed frequency m: h^d (-1)^{sum m_a} DFT (the sign is
    // the node lattice's -side/2 offset phase; (-1)^m = (-1)^k for even n).
    const std::vector<std::complex<double>> raw = run_dft(grid);
    const double hd = std::pow(h, d);
    double max_abs = 0.0;
    for (const auto& c : raw) max_abs = std::max(max_abs, hd * std::abs(c));
    FourierLowerBoundReport report;
    report.constant = std::numeric_limits<double>::infinity();
    report.min_transform = std::numeric_limits<double>::infinity();
    report.abscissae.reserve(raw.size());
    report.ratios.reserve(raw.size());
    const double negative_tol = 1e-8 * std::max(1.0, max_abs);
    for (std::int64_t flat = 0; flat < grid.size(); ++flat) {
        int parity = 0;
        std::int64_t rem = flat;
        for (int a = 0; a < d; ++a) {
            parity += static_cast<int>(rem % n);
            rem /= n;
        }
        const double sign = parity % 2 == 0 ? 1.0 : -1.0;
        const double v =
            hd * sign * raw[static_cast<std::size_t>(flat)].real();
        if (v < -negative_tol) {
            std::ostringstream msg;
            msg << "transform value " << v << " at |xi| = "
                << std::sqrt(frequency_norm_sq(grid, flat))
                << " is negative beyond tolerance " << negative_tol;
            throw NonPositiveTransform(msg.str());
        }
        const double xi = std::sqrt(frequency_norm_sq(grid, flat));
        const double ratio = v * std::pow(1.0 + xi, d + delta);
        report.abscissae.push_back(xi);
        report.ratios.push_back(ratio);
        report.min_transform = std::min(report.min_transform, v);
        report.constant = std::min(report.constant, ratio);
    }
    return report;
}

RescaleDecayReport rescale_decay_curve(
    const PeriodicGridFunction& f,
    const std::function<double(double)>& window_profile, double d_plus_delta,
    const std::vector<double>& epsilons, int min_cells) {
    RescaleDecayReport report;
    const double h = f.spacing();

    // Estimate F(0) by averaging the symmetric block of cells around the
    // origin (two per axis for even n, one for odd); a nonzero value means
    // the decay statement's hypothesis fails, which is worth flagging.
    {
        std::vector<std::vector<int>> near(static_cast<std::size_t>(f.dim));
        for (int a = 0; a < f.dim; ++a)
            for (int i = 0; i < f.n; ++i)
                if (std::abs(f.coordinate(i)) < 0.75 * h)
                    near[static_cast<std::size_t>(a)].push_back(i);
        std::complex<double> acc(0.0, 0.0);
        std::int64_t count = 0;
        std::vector<std::size_t> pick(static_cast<std::size_t>(f.dim), 0);
        bool done = false;
        while (!done) {
            std::int64_t flat = 0;
            for (int a = 0; a < f.dim; ++a)
                flat = flat * f.n +
                       near[static_cast<std::size_t>(a)]
                           [pick[static_cast<std::size_t>(a)]];
            acc += f.values[static_cast<std::size_t>(flat)];
            ++count;
            int a = f.dim - 1;
            while (a >= 0) {
                if (++pick[static_cast<std::size_t>(a)] <
                    near[static_cast<std::size_t>(a)].size())
                    break;
                pick[static_cast<std::size_t>(a)] = 0;
                --a;
            }
            done = a < 0;
        }
        double value_max = 0.0;
        for (const auto& v : f.values)
            value_max = std::max(value_max, std::abs(v));
        const double origin = std::abs(acc) / static_cast<double>(count);
        report.origin_warning = origin > 1e-6 * std::max(1.0, value_max);
    }

    std::vector<double> window(static_cast<std::size_t>(f.size()));
    for (double eps : epsilons) {
        if (!(eps > 0.0)) throw ConfigError("window radius must be positive");
        if (2.0 * eps / h < min_cells) {
            std::ostringstream msg;
            msg << "window radius " << eps << " spans only " << 2.0 * eps / h
                << " cells, fewer than the required " << min_cells;
            throw UnderResolved(msg.str());
        }
        for (std::int64_t flat = 0; flat < f.size(); ++flat) {
            std::int64_t rem = flat;
            double r2 = 0.0;
            for (int a = f.dim - 1; a >= 0; --a) {
                const double c = f.coordinate(static_cast<int>(rem % f.n));
                rem /= f.n;
                r2 += c * c;
            }
            const double rho = std::sqrt(r2) / eps;
            window[static_cast<std::size_t>(flat)] =
                rho < 1.0 ? window_profile(rho) : 0.0;
        }
        const LocalNormReport local = local_h_s_norm(f, window, d_plus_delta);
        report.epsilons.push_back(eps);
        report.norms.push_back(local.norm);
    }
    return report;
}

} // namespace gmclab
