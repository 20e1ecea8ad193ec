#pragma once

// Internal log-radius interpolation table shared by translation units that
// evaluate expensive radial kernels at many radii.  Not part of the public
// interface.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace gmclab::detail {

/// Uniform-in-log-radius table with local cubic interpolation.  Scale-
/// averaged kernels vary on every scale down to their finest layer, but as
/// functions of log r their derivatives stay O(1), so a uniform log grid
/// resolves them at any level; with a few thousand nodes the interpolation
/// error sits near 1e-11.
class RadialTable {
public:
    RadialTable(const std::function<double(double)>& f, double r_min,
                double r_max, int nodes)
        : s0_(std::log(r_min)),
          ds_((std::log(r_max) - std::log(r_min)) / (nodes - 1)),
          values_(nodes) {
        for (int i = 0; i < nodes; ++i)
            values_(i) = f(std::exp(s0_ + i * ds_));
    }

    double operator()(double r) const {
        const double s = std::log(r);
        const auto n = values_.size();
        const double pos = (s - s0_) / ds_;
        Eigen::Index i = static_cast<Eigen::Index>(std::floor(pos));
        i = std::clamp<Eigen::Index>(i, 1, n - 3);
        const double u = pos - static_cast<double>(i);
        const double wm = -u * (u - 1.0) * (u - 2.0) / 6.0;
        const double w0 = (u * u - 1.0) * (u - 2.0) / 2.0;
        const double w1 = -u * (u + 1.0) * (u - 2.0) / 2.0;
        const double w2 = u * (u * u - 1.0) / 6.0;
        return wm * values_(i - 1) + w0 * values_(i) + w1 * values_(i + 1) +
               w2 * values_(i + 2);
    }

private:
    double s0_, ds_;
    Eigen::VectorXd values_;
};

} // namespace gmclab::detail
