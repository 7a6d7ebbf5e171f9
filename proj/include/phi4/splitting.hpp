#pragma once

#include <cmath>
#include <map>
#include <optional>

#include "combinatorics.hpp"
#include "error.hpp"

namespace phi4 {

enum class Mode { zero_dim, four_dim };

/** Sunset kernel value and q^2-derivative at the mass shell q^2 = -m^2. */
struct ShellLoopValues {
    double value = 0.0;
    double derivative = 0.0;
};

/** Minimal (gamma0, a0, rho0) and maximal (gamma_max, rho_max, a_max) renormalization constants. */
struct RenormBoundConstants {
    double gamma0 = 1.0;
    double a0 = 0.0;
    double rho0 = 0.0;
    double gamma_max = 1.0;
    double rho_max = 0.0;
    double a_max = 0.0;
};

struct DeltaPair {
    double min = 0.0;
    double max = 0.0;
};

inline double gamma_max(double lambda)
{
    return 1.0 + 9.0 * lambda * (1.0 + 6.0 * lambda * lambda);
}

inline double default_d0(double lambda)
{
    return 0.03 * lambda;
}

inline double delta3_min(double lambda)
{
    return 6.0 * lambda / gamma_max(lambda);
}

inline RenormBoundConstants renorm_bound_constants(double lambda, Mode mode,
                                                   const std::optional<ShellLoopValues>& loop_values = std::nullopt)
{
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    RenormBoundConstants constants;
    constants.gamma_max = gamma_max(lambda);
    if (mode == Mode::zero_dim)
        return constants;
    if (!loop_values)
        throw config_error("renorm_bound_constants: four_dim mode needs the sunset shell value and derivative");
    const double smallest = delta3_min(lambda);
    constants.a0 = -smallest * loop_values->value;
    constants.rho0 = lambda * smallest * loop_values->derivative;
    constants.rho_max = 6.0 * lambda * lambda * loop_values->derivative;
    constants.a_max = 6.0 * lambda * loop_values->value;
    return constants;
}

inline double delta_infinity(double lambda, double d0)
{
    if (!(d0 > 0.0))
        throw config_error("delta_infinity: d0 must be positive");
    return 3.0 * lambda / d0;
}

inline DeltaPair delta_bounds(int order, double lambda, const RenormBoundConstants& constants, double d0)
{
    require_odd_order(order, 3, "delta_bounds");
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    require(d0 >= 0.0, "d0 must be non-negative");
    const double pairs = static_cast<double>(order) * (order - 1);
    const double shift_min = constants.gamma0 + std::abs(constants.rho0) + lambda * std::abs(constants.a0);
    const double shift_max = constants.gamma_max + std::abs(constants.rho_max) + lambda * std::abs(constants.a_max);
    const double numerator = order == 3 ? 6.0 * lambda : 3.0 * lambda * pairs;
    const double denominator_max = shift_min + pairs * d0;
    const double denominator_min = order == 3 ? constants.gamma_max : shift_max + 3.0 * lambda * pairs;
    if (!(denominator_max > 0.0) || !(denominator_min > 0.0))
        throw numerical_error("delta_bounds: non-positive denominator");
    DeltaPair bounds;
    bounds.max = numerator / denominator_max;
    bounds.min = numerator / denominator_min;
    return bounds;
}

/** Table of splitting bounds for every odd order 3..max_order. */
struct SplittingBounds {
    double lambda = 0.0;
    double d0 = 0.0;
    RenormBoundConstants constants;
    std::map<int, DeltaPair> table;
    double delta_inf = 0.0;

    const DeltaPair& at(int order) const
    {
        auto it = table.find(order);
        if (it == table.end())
            throw config_error("splitting bounds not tabulated for order " + std::to_string(order));
        return it->second;
    }
};

inline SplittingBounds make_splitting_bounds(double lambda, const RenormBoundConstants& constants, double d0,
                                             int max_order)
{
    require_odd_order(max_order, 3, "make_splitting_bounds");
    SplittingBounds bounds;
    bounds.lambda = lambda;
    bounds.d0 = d0;
    bounds.constants = constants;
    for (int order = 3; order <= max_order; order += 2)
        bounds.table[order] = delta_bounds(order, lambda, constants, d0);
    bounds.delta_inf = d0 > 0.0 ? delta_infinity(lambda, d0) : 0.0;
    return bounds;
}

} // namespace phi4
