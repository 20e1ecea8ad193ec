#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmclab/errors.hpp"

namespace gmclab {

inline constexpr double kQuadTol = 1e-10;

/// Adaptive Gauss-Kronrod integral of f over the finite interval [a, b].
/// Throws QuadratureBudgetExceeded if the error estimate cannot be driven
/// below the absolute tolerance even after full adaptive refinement.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = kQuadTol) {
    if (!(b > a)) return 0.0;
    double err = 0.0, l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, /*max_depth=*/10, /*rel_tol=*/1e-11, &err, &l1);
    if (err > abs_tol && err > 1e-11 * std::max(1.0, l1)) {
        throw QuadratureBudgetExceeded("error estimate " + std::to_string(err) +
                                       " above tolerance on [" + std::to_string(a) +
                                       ", " + std::to_string(b) + "]");
    }
    return value;
}

/// Integrate with interior breakpoints (kinks of the integrand), so the
/// adaptive rule only ever sees smooth pieces.
template <class F>
double integrate_split(F&& f, double a, double b,
                       const std::vector<double>& breaks,
                       double abs_tol = kQuadTol) {
    if (!(b > a)) return 0.0;
    std::vector<double> cuts{a};
    for (double c : breaks)
        if (c > a && c < b) cuts.push_back(c);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        total += integrate(f, cuts[k], cuts[k + 1], abs_tol);
    return total;
}

} // namespace gmclab
