#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gmclab {

/// Uniform cell-centered lattice on the cube [center-radius, center+radius]^d.
/// Site i (row-major flattened) sits at the center of cell i; all quadrature
/// over the cube uses the uniform cell volume spacing()^dim as weight.
struct GridSpec {
    int dim = 1;              // spatial dimension (1..3)
    int points_per_axis = 1;  // n
    double radius = 0.5;      // half side length of the cube
    std::array<double, 3> center{0.0, 0.0, 0.0};

    double spacing() const { return 2.0 * radius / points_per_axis; }

    std::int64_t size() const {
        std::int64_t s = 1;
        for (int k = 0; k < dim; ++k) s *= points_per_axis;
        return s;
    }

    std::array<double, 3> point(std::int64_t flat) const {
        std::array<double, 3> x{0.0, 0.0, 0.0};
        const double h = spacing();
        for (int k = dim - 1; k >= 0; --k) {
            const std::int64_t idx = flat % points_per_axis;
            flat /= points_per_axis;
            x[k] = center[k] - radius + (static_cast<double>(idx) + 0.5) * h;
        }
        return x;
    }

    double distance(std::int64_t i, std::int64_t j) const {
        const auto a = point(i);
        const auto b = point(j);
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(s);
    }

    /// Same lattice resolution on a cube shrunk about its center.
    GridSpec shrunk(double factor) const {
        GridSpec g = *this;
        g.radius /= factor;
        return g;
    }
};

} // namespace gmclab
