#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "norms.hpp"
#include "parallel.hpp"
#include "splitting.hpp"
#include "trees.hpp"
#include "zerodim.hpp"

namespace phi4 {

/** Which gamma~ enters the denominators of the mapping. */
enum class GammaRule {
    input,  // gamma~ = -6 Lambda prod H^2 Delta_F / H^4 at q = 0 of the mapped sequence
    unit,   // gamma~ = gamma_0 = 1, the normalization of the fundamental sequence
};

inline GammaRule parse_gamma_rule(const std::string& text)
{
    if (text == "input")
        return GammaRule::input;
    if (text == "unit")
        return GammaRule::unit;
    throw config_error("gamma rule must be 'input' or 'unit', got '" + text + "'");
}

inline const char* to_string(GammaRule rule)
{
    return rule == GammaRule::input ? "input" : "unit";
}

struct MapOptions {
    ClosureRule closure = ClosureRule::tree;
    GammaRule gamma = GammaRule::input;
    bool flip_rho = false;      // use +rho~ in the two-point numerator instead of -rho~
    bool shell_subtracted = true;  // subtract the shell limit of the a~ term so that H^2' Delta_F -> 1
    bool check_membership = true;
    double d0 = -1.0;           // negative selects the default 0.03 * lambda
};

inline SplittingBounds sequence_bounds(const GreenSequence& h, double d0 = -1.0)
{
    return make_splitting_bounds(h.lambda, renorm_bound_constants(h.lambda, Mode::four_dim, h.channel->shell()),
                                 d0 < 0.0 ? default_d0(h.lambda) : d0, h.n_max + 2);
}

/** Global terms of one configuration. */
struct GlobalTerms {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool closure_used = false;
};

/** H^{n+3}(n+2, active, t), closed by the tree rule with delta_{n+2,max} beyond the truncation. */
inline double higher_vertex(const GreenSequence& h, int order, int active, std::size_t scale,
                            const SplittingBounds& bounds, bool& closure_used)
{
    const int top = order + 2;
    if (top <= h.n_max) {
        closure_used = false;
        return h.at(top, active, scale);
    }
    closure_used = true;
    return bounds.at(top).max * h.c_term_at(top, active, scale) / splitting_normalization(top, h.lambda);
}

/**
 * A, B, C at (order, active, t) at unit loop kernel. The bubble of H^{j2+2} is H^{j2+2} whose loop leg carries
 * the momentum of the split-off block (one unit leg when that block is active); the two-loop term is H^{n+3}
 * with two soft loop legs.
 */
inline GlobalTerms global_terms(const GreenSequence& h, const MomentumConfig& config, const SplittingBounds& bounds)
{
    validate(config);
    require_odd_order(config.order, 3, "global_terms");
    require(config.order <= h.n_max, "global_terms: order exceeds n_max");
    const std::size_t s = scale_index(*h.layout, config.scale);
    const int order = config.order;
    const int active = config.active;
    const double lambda = h.lambda;
    GlobalTerms terms;
    terms.c = h.c_term_at(order, active, s);
    double b_sum = 0.0;
    for (int odd_part = 1; odd_part <= order - 2; odd_part += 2) {
        const int even_part = order - odd_part;
        for (int count = 0; count <= std::min(odd_part, active); ++count) {
            const int rest = active - count;
            if (rest > even_part)
                continue;
            const double weight = binomial_value(active, count) * binomial_value(order - active, odd_part - count);
            const int carried = rest + std::min(count, 1);
            b_sum += weight * h.block(odd_part, count, s) * h.at(even_part + 1, carried, s);
        }
    }
    terms.b = -3.0 * lambda * b_sum;
    terms.a = -lambda * higher_vertex(h, order, active, s, bounds, terms.closure_used);
    return terms;
}

/** D_n = (|B| - |A|) / |H^{n+1}| at a configuration. */
inline double d_n(const GreenSequence& h, const MomentumConfig& config, const SplittingBounds& bounds)
{
    const std::size_t s = scale_index(*h.layout, config.scale);
    const double own = std::abs(h.at(config.order, config.active, s));
    if (own == 0.0)
        throw numerical_error("d_n: vanishing H^" + std::to_string(config.order + 1));
    const GlobalTerms terms = global_terms(h, config, bounds);
    return (std::abs(terms.b) - std::abs(terms.a)) / own;
}

/** Tilde renormalization constants of the reduced two-loop channel [N3 H^4](q) = -delta~_3 N(q). */
struct RenormConstants {
    double a = 0.0;
    double rho = 0.0;
    double gamma = 0.0;
    double delta3 = 0.0;
};

inline RenormConstants renorm_constants(const GreenSequence& h)
{
    RenormConstants rc;
    rc.delta3 = zero_momentum_splitting(h);
    rc.a = -rc.delta3 * h.channel->shell_value();
    rc.rho = h.lambda * rc.delta3 * h.channel->shell_derivative();
    rc.gamma = zero_momentum_gamma(h);
    return rc;
}

/** a(q) = [N3 H^4](q) and rho(q) = -Lambda d/dq^2 [N3 H^4](q) of the reduced channel. */
inline double renorm_a_at(const GreenSequence& h, double q2)
{
    return -zero_momentum_splitting(h) * h.channel->value(q2);
}

inline double renorm_rho_at(const GreenSequence& h, double q2)
{
    return h.lambda * zero_momentum_splitting(h) * h.channel->derivative(q2);
}

/** gamma(q) = -6 Lambda prod H^2 Delta_F / H^4 at an order-3 configuration. */
inline double renorm_gamma_at(const GreenSequence& h, const MomentumConfig& config)
{
    require(config.order == 3, "renorm_gamma_at: needs an order-3 configuration");
    const std::size_t s = scale_index(*h.layout, config.scale);
    const double vertex = h.at(3, config.active, s);
    if (vertex == 0.0)
        throw numerical_error("renorm_gamma_at: vanishing H^4");
    double product = 1.0;
    for (int leg = 0; leg < 3; ++leg)
        product *= h.block(1, leg < config.active ? 1 : 0, s);
    return -6.0 * h.lambda * product / vertex;
}

/** Magnitude envelopes |x_min| <= |x~| <= |x_max| of the renormalization constants. */
struct RenormEnvelope {
    bool a = true;
    bool rho = true;
    bool gamma = true;

    bool all() const { return a && rho && gamma; }
};

inline RenormEnvelope renorm_envelope(const RenormConstants& rc, const RenormBoundConstants& constants,
                                      const SplittingBounds& bounds, double slack = 1e-9)
{
    auto within = [slack](double value, double low, double high) {
        return std::abs(value) >= std::abs(low) * (1.0 - slack) && std::abs(value) <= std::abs(high) * (1.0 + slack);
    };
    RenormEnvelope env;
    env.a = within(rc.a, constants.a0, constants.a_max);
    env.rho = within(rc.rho, constants.rho0, constants.rho_max);
    const double gamma_low = 6.0 * bounds.lambda / bounds.at(3).max;
    env.gamma = within(rc.gamma, gamma_low, constants.gamma_max);
    return env;
}

/** Phi_R membership: the hard conditions (signs, splitting bounds) and the reported envelopes. */
struct Membership {
    bool signs = true;
    bool splitting = true;
    bool h2_lower = true;
    bool h2_upper = true;
    RenormEnvelope renorm;
    double splitting_margin = 0.0;  // min over samples of the relative distance to the nearer bound
    double worst_h2_lower = 0.0;    // min over invariants of H^2 / H^2_min - 1
    double worst_h2_upper = 0.0;    // max over invariants of H^2 / H^2_max - 1
    std::string violation;

    bool in_phi_r() const { return signs && splitting; }
};

inline Membership check_membership(const GreenSequence& h, const SplittingBounds& bounds, double slack = 1e-9)
{
    Membership m;
    m.signs = signs_alternate(h);
    if (!m.signs)
        m.violation = "sign alternation";
    m.splitting_margin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < h.layout->scales.size(); ++s) {
        for (int order = 3; order <= h.n_max; order += 2) {
            const DeltaPair pair = bounds.at(order);
            for (int active = 0; active <= order; ++active) {
                const double delta = splitting_at(h, {order, active, h.layout->scales[s]});
                const double margin = std::min((delta - pair.min) / pair.min, (pair.max - delta) / pair.max);
                if (margin < m.splitting_margin) {
                    m.splitting_margin = margin;
                    if (margin < -slack && m.splitting) {
                        m.splitting = false;
                        if (m.violation.empty())
                            m.violation = "splitting bound at n=" + std::to_string(order) + ", active=" +
                                          std::to_string(active) + ", t=" + format_number(h.layout->scales[s]) +
                                          ": delta=" + format_number(delta) + " outside [" + format_number(pair.min) +
                                          ", " + format_number(pair.max) + "]";
                    }
                }
            }
        }
    }
    m.worst_h2_lower = std::numeric_limits<double>::infinity();
    m.worst_h2_upper = -std::numeric_limits<double>::infinity();
    for (const auto& [q2, shift] : h.shift) {
        const double value = h.two_point(q2);
        m.worst_h2_lower = std::min(m.worst_h2_lower, value / h2_min(q2) - 1.0);
        m.worst_h2_upper = std::max(m.worst_h2_upper, value / h2_max(q2, h.lambda) - 1.0);
    }
    m.h2_lower = m.worst_h2_lower >= -slack;
    m.h2_upper = m.worst_h2_upper <= slack;
    m.renorm = renorm_envelope(renorm_constants(h), bounds.constants, bounds, slack);
    return m;
}

/** One application of M* with its per-sample diagnostics. */
struct MapStep {
    GreenSequence next;
    RenormConstants constants;  // tilde constants of the input
    double gamma_used = 0.0;
    std::vector<std::vector<double>> deltas;   // delta'_n laid out like the vertex samples
    std::vector<std::vector<double>> d_terms;  // D_n laid out like the vertex samples
    Membership input;
};

inline MapStep apply_mstar_detailed(const GreenSequence& h, const MapOptions& options = {})
{
    require(h.lambda > 0.0 && std::isfinite(h.lambda), "apply_mstar: lambda must be positive");
    const SplittingBounds bounds = sequence_bounds(h, options.d0);
    MapStep step;
    if (options.check_membership) {
        step.input = check_membership(h, bounds);
        if (!step.input.in_phi_r())
            throw numerical_error("apply_mstar: input outside Phi_R (" + step.input.violation + ")");
    }
    const double lambda = h.lambda;
    const RenormConstants rc = renorm_constants(h);
    step.constants = rc;
    step.gamma_used = options.gamma == GammaRule::input ? rc.gamma : bounds.constants.gamma0;
    const double denominator = step.gamma_used + rc.rho;
    if (!(denominator > 0.0))
        throw numerical_error("apply_mstar: gamma~ + rho~ is not positive");

    GreenSequence& next = step.next;
    next = empty_like(h);
    next.iterate = h.iterate + 1;
    const double rho_term = options.flip_rho ? rc.rho : -rc.rho;
    double shell_slope = 0.0;
    if (options.shell_subtracted) {
        const auto nearest = h.shift.upper_bound(-1.0);
        if (nearest != h.shift.end())
            shell_slope = nearest->second / (nearest->first + 1.0);
    }
    for (auto& [q2, shift] : next.shift) {
        if (q2 == -1.0)
            continue;
        const double old_shift = h.shift.at(q2);
        const double channel_term =
            -rc.delta3 * h.channel->shell_difference_quotient(q2) - rc.a * (old_shift / (q2 + 1.0) - shell_slope);
        shift = (rho_term - lambda * channel_term) / denominator;
    }

    const auto& scales = h.layout->scales;
    step.deltas.assign(scales.size(), std::vector<double>(h.vertex.front().size(), 0.0));
    step.d_terms = step.deltas;
    const double delta_inf = delta_infinity(lambda, bounds.d0);
    parallel_for(scales.size(), [&](std::size_t s) {
        for (int order = 3; order <= h.n_max; order += 2) {
            const double norm = splitting_normalization(order, lambda);
            for (int active = 0; active <= order; ++active) {
                double d_term = 0.0;
                if (order == h.n_max && options.closure == ClosureRule::asymptotic)
                    d_term = 3.0 * lambda * order * (order - 1) / delta_inf;
                else
                    d_term = d_n(h, {order, active, scales[s]}, bounds);
                const double delta = norm / (denominator + d_term - lambda * rc.a);
                const double c = next.c_term_at(order, active, s);
                next.at(order, active, s) = delta * c / norm;
                const std::size_t slot = vertex_offset(order) + static_cast<std::size_t>(active);
                step.deltas[s][slot] = delta;
                step.d_terms[s][slot] = d_term;
            }
        }
    });
    return step;
}

inline GreenSequence apply_mstar(const GreenSequence& h, const MapOptions& options = {})
{
    return apply_mstar_detailed(h, options).next;
}

/**
 * Relative residual of the image against the global-term form (gamma~ + rho~) H' = A + B + C' + Lambda a~ H' at
 * one configuration, with A + B rescaled by H'/H. The residual vanishes identically for the splitting update.
 */
inline double mstar_equivalence_residual(const GreenSequence& h, const MapStep& step, const MomentumConfig& config,
                                         const MapOptions& options = {})
{
    const SplittingBounds bounds = sequence_bounds(h, options.d0);
    const std::size_t s = scale_index(*h.layout, config.scale);
    const GlobalTerms terms = global_terms(h, config, bounds);
    const double before = h.at(config.order, config.active, s);
    const double after = step.next.at(config.order, config.active, s);
    const double c_image = step.next.c_term_at(config.order, config.active, s);
    const double lhs = (step.gamma_used + step.constants.rho) * after;
    const double rhs = (terms.a + terms.b) * after / before + c_image + h.lambda * step.constants.a * after;
    return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
}

} // namespace phi4
