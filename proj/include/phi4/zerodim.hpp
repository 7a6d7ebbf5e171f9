#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "combinatorics.hpp"
#include "error.hpp"
#include "splitting.hpp"

namespace phi4 {

/** How the A-term at the top orders, which needs H^{n+3} beyond the truncation, is closed. */
enum class ClosureRule { tree, asymptotic };

inline ClosureRule parse_closure(const std::string& text)
{
    if (text == "tree")
        return ClosureRule::tree;
    if (text == "asymptotic")
        return ClosureRule::asymptotic;
    throw config_error("closure must be 'tree' or 'asymptotic', got '" + text + "'");
}

inline const char* to_string(ClosureRule rule)
{
    return rule == ClosureRule::tree ? "tree" : "asymptotic";
}

/** Sign (-1)^((n-1)/2) carried by H^{n+1} on the tree-type subset. */
inline int alternating_sign(int order)
{
    return ((order - 1) / 2) % 2 == 0 ? 1 : -1;
}

/** Zero-momentum Green's function values H^{n+1} for odd n = 1..n_max. */
struct ZeroDimSequence {
    double lambda = 0.0;
    int n_max = 0;
    std::vector<double> values;

    double& at(int order) { return values.at(static_cast<std::size_t>((order - 1) / 2)); }
    double at(int order) const { return values.at(static_cast<std::size_t>((order - 1) / 2)); }

    bool signs_alternate() const
    {
        if (!(at(1) > 0.0))
            return false;
        for (int order = 3; order <= n_max; order += 2) {
            const double value = at(order);
            if (value != 0.0 && (value > 0.0) != (alternating_sign(order) > 0))
                return false;
        }
        return true;
    }
};

inline ZeroDimSequence free_sequence(double lambda, int n_max)
{
    require_odd_order(n_max, 5, "free_sequence");
    ZeroDimSequence sequence;
    sequence.lambda = lambda;
    sequence.n_max = n_max;
    sequence.values.assign(static_cast<std::size_t>((n_max + 1) / 2), 0.0);
    sequence.values[0] = 1.0;
    return sequence;
}

struct ZeroDimOptions {
    ClosureRule closure = ClosureRule::tree;
    double d0 = -1.0;  // negative selects the default 0.03 * lambda
};

/** The 0-d C-term -6 Lambda sum weight * prod H^{i+1}, evaluated on a getter over orders. */
template <class Getter>
double zero_dim_c_term(int order, double lambda, Getter&& value_of)
{
    double sum = 0.0;
    for (const auto& partition : triple_partitions(order)) {
        double product = to_double(partition.weight);
        for (int part : partition.parts)
            product *= value_of(part);
        sum += product;
    }
    return -6.0 * lambda * sum;
}

/** 0-d D_n = (|B^{n+1}| - |A^{n+1}|)/|H^{n+1}| from the unprimed state; higher_value is |H^{n+3}|. */
inline double zero_dim_d_term(const ZeroDimSequence& state, int order, double higher_value)
{
    const double lambda = state.lambda;
    const double own = std::abs(state.at(order));
    double b_sum = 0.0;
    for (const auto& pair : pair_partitions(order)) {
        const int odd_part = pair.parts[0];
        const int even_part = pair.parts[1];
        const double weight = to_double(pair.weight);
        if (odd_part == 1) {
            b_sum += weight * std::abs(state.at(1));
            continue;
        }
        const double numerator = std::abs(state.at(odd_part)) * std::abs(state.at(even_part + 1));
        if (numerator == 0.0)
            continue;
        if (own == 0.0)
            throw numerical_error("zero_dim_d_term: vanishing H^" + std::to_string(order + 1) + " with non-zero B-term");
        b_sum += weight * numerator / own;
    }
    double a_part = 0.0;
    if (higher_value != 0.0) {
        if (own == 0.0)
            throw numerical_error("zero_dim_d_term: vanishing H^" + std::to_string(order + 1) + " with non-zero A-term");
        a_part = lambda * std::abs(higher_value) / own;
    }
    return 3.0 * lambda * b_sum - a_part;
}

struct ZeroDimStep {
    ZeroDimSequence next;
    std::vector<double> deltas;  // delta'_n for n = 3..n_max
    std::vector<double> d_terms; // D_n for n = 3..n_max
};

inline ZeroDimStep apply_m0_detailed(const ZeroDimSequence& state, const ZeroDimOptions& options = {})
{
    require_odd_order(state.n_max, 5, "apply_m0");
    const double lambda = state.lambda;
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    for (double value : state.values)
        if (value != 0.0 && std::abs(value) < 1e-300)
            throw numerical_error("apply_m0: |H| underflowed below 1e-300; truncation too aggressive for this lambda");

    ZeroDimStep step;
    step.next = state;
    ZeroDimSequence& next = step.next;
    const int n_max = state.n_max;
    if (lambda == 0.0) {
        next = free_sequence(0.0, n_max);
        step.deltas.assign(static_cast<std::size_t>((n_max - 1) / 2), 0.0);
        step.d_terms = step.deltas;
        return step;
    }
    const double d0 = options.d0 < 0.0 ? default_d0(lambda) : options.d0;
    const RenormBoundConstants constants = renorm_bound_constants(lambda, Mode::zero_dim);

    auto higher_value = [&](int order) -> double {
        if (order + 2 <= n_max)
            return state.at(order + 2);
        const int top = order + 2;
        const double delta_top = delta_bounds(top, lambda, constants, d0).max;
        const double c_top = zero_dim_c_term(top, lambda, [&](int part) { return state.at(part); });
        return delta_top * c_top / (3.0 * lambda * top * (top - 1));
    };

    next.at(1) = 1.0 - lambda * state.at(3);

    const double d3 = zero_dim_d_term(state, 3, higher_value(3));
    const double delta3 = 6.0 * lambda / (1.0 + d3);
    next.at(3) = -delta3 * std::pow(next.at(1), 3);
    step.deltas.push_back(delta3);
    step.d_terms.push_back(d3);

    for (int order = 5; order <= n_max; order += 2) {
        const double pairs = 3.0 * lambda * order * (order - 1);
        double d_term = 0.0;
        if (order == n_max && options.closure == ClosureRule::asymptotic)
            d_term = pairs / delta_infinity(lambda, d0);
        else
            d_term = zero_dim_d_term(state, order, higher_value(order));
        const double delta = pairs / (1.0 + d_term);
        const double c_term = zero_dim_c_term(order, lambda, [&](int part) { return next.at(part); });
        next.at(order) = delta * c_term / pairs;
        step.deltas.push_back(delta);
        step.d_terms.push_back(d_term);
    }
    return step;
}

inline ZeroDimSequence apply_m0(const ZeroDimSequence& state, ClosureRule closure = ClosureRule::tree)
{
    ZeroDimOptions options;
    options.closure = closure;
    return apply_m0_detailed(state, options).next;
}

/** Relative sup distance max_n |a - b| / max(|a|, |b|), with 0 where both vanish. */
inline double relative_sup_distance(const ZeroDimSequence& a, const ZeroDimSequence& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double scale = std::max(std::abs(a.values[i]), std::abs(b.values[i]));
        if (scale > 0.0)
            worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / scale);
    }
    return worst;
}

enum class SplittingConvention {
    tree_ratio,         // delta_n = 3 Lambda n(n-1) H^{n+1} / C^{n+1}
    zero_momentum_law,  // delta_n = -H^{n+1} / (n(n-1) H^{n-1} (H^2)^2)
};

inline std::vector<double> extract_splitting(const ZeroDimSequence& state,
                                             SplittingConvention convention = SplittingConvention::tree_ratio)
{
    const double lambda = state.lambda;
    std::vector<double> deltas;
    const double h2 = state.at(1);
    if (h2 == 0.0)
        throw numerical_error("extract_splitting: H^2 vanishes");
    const double delta3 = -state.at(3) / std::pow(h2, 3);
    if (!(delta3 > 0.0))
        throw numerical_error("extract_splitting: H^4 vanishes or has the wrong sign");
    deltas.push_back(delta3);
    for (int order = 5; order <= state.n_max; order += 2) {
        double denominator = 0.0;
        double numerator = 0.0;
        if (convention == SplittingConvention::tree_ratio) {
            denominator = zero_dim_c_term(order, lambda, [&](int part) { return state.at(part); });
            numerator = 3.0 * lambda * order * (order - 1) * state.at(order);
        } else {
            denominator = static_cast<double>(order) * (order - 1) * state.at(order - 2) * h2 * h2;
            numerator = -state.at(order);
        }
        if (denominator == 0.0)
            throw numerical_error("extract_splitting: zero denominator at order " + std::to_string(order));
        deltas.push_back(numerator / denominator);
    }
    return deltas;
}

struct ZeroDimDiagnostics {
    std::vector<double> distances;
    std::vector<double> ratios;  // ratios[k] = distances[k+1] / distances[k]
    int iterations = 0;
    bool converged = false;
    bool signs_alternate_every_iterate = true;
};

struct ZeroDimSolution {
    ZeroDimSequence sequence;
    std::vector<double> deltas;
    ZeroDimDiagnostics diagnostics;
};

inline ZeroDimSolution solve_zerodim(double lambda, int n_max, double tol, int max_iter,
                                     const ZeroDimOptions& options = {})
{
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    require(tol > 0.0, "tol must be positive");
    require(max_iter > 0, "max_iter must be positive");
    ZeroDimSolution solution;
    ZeroDimSequence state = free_sequence(lambda, n_max);
    auto& diagnostics = solution.diagnostics;
    for (int iteration = 1; iteration <= max_iter; ++iteration) {
        ZeroDimStep step = apply_m0_detailed(state, options);
        const double distance = relative_sup_distance(step.next, state);
        if (!diagnostics.distances.empty() && diagnostics.distances.back() > 0.0)
            diagnostics.ratios.push_back(distance / diagnostics.distances.back());
        diagnostics.distances.push_back(distance);
        diagnostics.signs_alternate_every_iterate =
            diagnostics.signs_alternate_every_iterate && step.next.signs_alternate();
        state = std::move(step.next);
        solution.deltas = std::move(step.deltas);
        diagnostics.iterations = iteration;
        if (distance < tol) {
            diagnostics.converged = true;
            break;
        }
    }
    solution.sequence = state;
    if (!diagnostics.converged) {
        const double last = diagnostics.ratios.empty() ? 0.0 : diagnostics.ratios.back();
        throw numerical_error("solve_zerodim: no convergence after " + std::to_string(max_iter) +
                              " iterations (last ratio " + std::to_string(last) + ")");
    }
    return solution;
}

} // namespace phi4
