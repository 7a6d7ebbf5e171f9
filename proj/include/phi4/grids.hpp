#pragma once

#include <cmath>
#include <vector>

#include "error.hpp"

namespace phi4 {

/** Geometric grid of `points` values from `low` to `high` inclusive. */
inline std::vector<double> geometric_grid(double low, double high, int points)
{
    require(low > 0.0 && high > low, "geometric_grid: need 0 < low < high");
    require(points >= 2, "geometric_grid: need at least two points");
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double step = std::log(high / low) / (points - 1);
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = low * std::exp(step * i);
    grid.back() = high;
    return grid;
}

/** Standard radial q^2 grid in units of m^2. */
struct RadialGridSpec {
    double low = 1e-4;
    double high = 1e6;
    int points = 64;
};

inline std::vector<double> radial_grid(const RadialGridSpec& spec = {})
{
    return geometric_grid(spec.low, spec.high, spec.points);
}

/** q^2 values approaching the mass shell q^2 = -m^2 from above. */
inline std::vector<double> shell_neighborhood()
{
    return {-1.0 + 1e-6, -1.0 + 1e-4, -1.0 + 1e-2, -0.5};
}

inline std::vector<double> linear_grid(double low, double high, int points)
{
    require(points >= 2 && high > low, "linear_grid: need at least two points and high > low");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = low + (high - low) * i / (points - 1);
    return grid;
}

} // namespace phi4
