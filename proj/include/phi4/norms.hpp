#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "error.hpp"
#include "loops.hpp"
#include "splitting.hpp"
#include "trees.hpp"

namespace phi4 {

inline double weight_m1(double q2, double lambda)
{
    require(q2 >= 0.0, "weight_m1: q^2 must be non-negative");
    const double shifted = q2 + 1.0;
    return gamma_max(lambda) * shifted * (1.0 + 6.0 * std::pow(shifted, M_PI * M_PI / 54.0));
}

/** Two-point envelope H^2_max = gamma_max ((q^2+m^2) + 6 Lambda^2 (q^2+m^2)^(pi^2/54)). */
inline double h2_max(double q2, double lambda)
{
    const double shifted = q2 + 1.0;
    return gamma_max(lambda) * (shifted + 6.0 * lambda * lambda * std::pow(shifted, M_PI * M_PI / 54.0));
}

inline double h2_min(double q2)
{
    return q2 + 1.0;
}

/** N_1-multiplied weight M_1 Delta_F of a single leg at q^2. */
inline double leg_weight(double q2, double lambda)
{
    return weight_m1(q2, lambda) * propagator(q2);
}

/** Weight tables of the four norm families on one sample layout. */
struct NormWeights {
    double lambda = 0.0;
    int n_max = 0;
    std::shared_ptr<const SampleLayout> layout;
    std::shared_ptr<const SunsetChannel> channel;
    SplittingBounds bounds;
    std::vector<double> m1;               // M_1 on the radial grid
    std::vector<std::vector<double>> mn;  // mn[scale][(n-3)/2] = M_n at (n, n, t)
    std::vector<std::vector<double>> soft;  // soft[scale][(n-3)/2] = hat M_(n,2) at (n, n-1, t)
    std::vector<double> hat3;             // hat M_3 on the radial grid, lower band edge
    std::vector<double> loop_profile;     // max(|N|, |N'|) of the sequence kernel on the radial grid, upper band edge
    double gamma_weight = 0.0;            // N_gamma
};

inline std::size_t order_index(int order)
{
    return static_cast<std::size_t>((order - 3) / 2);
}

inline double recursion_weight(int order, double lambda, const SplittingBounds& bounds, double lower, double scale)
{
    const double leg = leg_weight(block_invariant(1, scale), lambda);
    return order * (order - 1) * bounds.at(order).max * lower * propagator(block_invariant(order - 2, scale)) * leg *
           leg;
}

/**
 * Builds the weights for sequences on `layout` carrying the kernel `channel`. The hat M_3 family uses the
 * weighted (M_1-inserted) sunset, which needs the tabulated inner bubble.
 */
inline NormWeights make_norm_weights(double lambda, std::shared_ptr<const SampleLayout> layout,
                                     std::shared_ptr<const SunsetChannel> channel, double d0 = -1.0)
{
    require(lambda > 0.0 && std::isfinite(lambda), "norm weights need a positive lambda");
    NormWeights w;
    w.lambda = lambda;
    w.n_max = layout->n_max;
    w.layout = layout;
    w.channel = channel;
    w.bounds = make_splitting_bounds(lambda, renorm_bound_constants(lambda, Mode::four_dim, channel->shell()),
                                     d0 < 0.0 ? default_d0(lambda) : d0, layout->n_max + 2);
    for (double q2 : layout->radial)
        w.m1.push_back(weight_m1(q2, lambda));
    for (double t : layout->scales) {
        std::vector<double> tower;
        std::vector<double> soft;
        const double leg = leg_weight(block_invariant(1, t), lambda);
        tower.push_back(6.0 * lambda * leg * leg * leg);
        soft.push_back(6.0 * lambda * leg * leg);
        for (int order = 5; order <= layout->n_max; order += 2) {
            const double lower = tower.back();
            tower.push_back(recursion_weight(order, lambda, w.bounds, lower, t));
            soft.push_back(order * (order - 1) * w.bounds.at(order).max * lower * leg);
        }
        w.mn.push_back(tower);
        w.soft.push_back(soft);
    }
    const SunsetChannel weighted(SunsetVariant::weighted, lambda, channel->config());
    weighted.prefetch(layout->radial, true);
    channel->prefetch(layout->radial, true);
    for (std::size_t i = 0; i < layout->radial.size(); ++i) {
        const double q2 = layout->radial[i];
        const double value = std::max(std::abs(weighted.value(q2)) - weighted.value_error(q2), 0.0);
        const double slope = std::max(std::abs(weighted.derivative(q2)) - weighted.derivative_error(q2), 0.0);
        w.hat3.push_back(6.0 * lambda * std::max(value, slope) * w.m1[i]);
        w.loop_profile.push_back(std::max(std::abs(channel->value(q2)) + channel->value_error(q2),
                                          std::abs(channel->derivative(q2)) + channel->derivative_error(q2)));
        if (!(w.hat3.back() > 0.0))
            throw numerical_error("norm weights: hat M_3 vanishes at q^2 = " + format_number(q2));
    }
    const double zero_leg = leg_weight(0.0, lambda);
    w.gamma_weight = gamma_max(lambda) * zero_leg * zero_leg * zero_leg;
    return w;
}

/** Zero-momentum splitting -H^4(0)/(H^2(0) Delta_F(0))^3 entering the reduced two-loop channel; 0 for a null H^4. */
inline double zero_momentum_splitting(const GreenSequence& h)
{
    const double vertex = h.at(3, 0, 0);
    if (vertex == 0.0)
        return 0.0;
    const double leg = h.amputated_two_point(0.0);
    if (leg == 0.0)
        throw numerical_error("zero-momentum splitting: H^2(0) vanishes with non-zero H^4(0)");
    return -vertex / (leg * leg * leg);
}

/** gamma~ = -6 Lambda (H^2(0) Delta_F(0))^3 / H^4(0); 0 for a null H^4. */
inline double zero_momentum_gamma(const GreenSequence& h)
{
    const double vertex = h.at(3, 0, 0);
    if (vertex == 0.0)
        return 0.0;
    const double leg = h.amputated_two_point(0.0);
    return -6.0 * h.lambda * leg * leg * leg / vertex;
}

/** Largest entry of each norm family. */
struct NormBreakdown {
    double two_point = 0.0;
    double vertex = 0.0;
    double loop = 0.0;
    double soft = 0.0;
    double gamma = 0.0;

    double total() const { return std::max({two_point, vertex, loop, soft, gamma}); }
};

inline void check_compatible(const GreenSequence& h, const NormWeights& w)
{
    if (h.layout != w.layout && (h.layout->scales != w.layout->scales || h.layout->radial != w.layout->radial))
        throw config_error("norm: sequence and weights use different sample layouts");
    if (h.n_max != w.n_max)
        throw config_error("norm: sequence truncation differs from the weights");
    if (h.channel->variant() != w.channel->variant())
        throw config_error("norm: sequence and weights use different two-loop kernels");
}

/**
 * Family maxima of the difference a - b (b may be null for the norm of a). Sampled entries only: the sup
 * over momenta is the maximum over the layout.
 */
inline NormBreakdown norm_breakdown_of(const GreenSequence& a, const GreenSequence* b, const NormWeights& w)
{
    check_compatible(a, w);
    if (b)
        check_compatible(*b, w);
    NormBreakdown out;
    const auto& layout = *w.layout;
    for (std::size_t i = 0; i < layout.radial.size(); ++i) {
        const double q2 = layout.radial[i];
        const double value = a.two_point(q2) - (b ? b->two_point(q2) : 0.0);
        out.two_point = std::max(out.two_point, std::abs(value) / w.m1[i]);
    }
    for (std::size_t s = 0; s < layout.scales.size(); ++s) {
        for (int order = 3; order <= w.n_max; order += 2) {
            const std::size_t k = order_index(order);
            const double full = a.at(order, order, s) - (b ? b->at(order, order, s) : 0.0);
            out.vertex = std::max(out.vertex, std::abs(full) / w.mn[s][k]);
            const double soft = a.at(order, order - 1, s) - (b ? b->at(order, order - 1, s) : 0.0);
            out.soft = std::max(out.soft, std::abs(soft) / w.soft[s][k]);
        }
    }
    const double splitting = zero_momentum_splitting(a) - (b ? zero_momentum_splitting(*b) : 0.0);
    for (std::size_t i = 0; i < layout.radial.size(); ++i)
        out.loop = std::max(out.loop, std::abs(splitting) * w.loop_profile[i] / w.hat3[i]);
    const double gamma = zero_momentum_gamma(a) - (b ? zero_momentum_gamma(*b) : 0.0);
    out.gamma = std::abs(gamma) / w.gamma_weight;
    return out;
}

inline NormBreakdown norm_breakdown(const GreenSequence& h, const NormWeights& w)
{
    return norm_breakdown_of(h, nullptr, w);
}

inline double banach_norm(const GreenSequence& h, const NormWeights& w)
{
    return norm_breakdown(h, w).total();
}

inline NormBreakdown distance_breakdown(const GreenSequence& a, const GreenSequence& b, const NormWeights& w)
{
    return norm_breakdown_of(a, &b, w);
}

inline double distance(const GreenSequence& a, const GreenSequence& b, const NormWeights& w)
{
    return distance_breakdown(a, b, w).total();
}

/** The three envelope ratios of the ball radius and their maximum. */
struct BallRadius {
    double splitting_gap = 0.0;
    double two_point_gap = 0.0;
    double loop_gap = 0.0;

    double value() const { return std::max({splitting_gap, two_point_gap, loop_gap}); }
};

inline BallRadius ball_radius_r0(const NormWeights& w)
{
    BallRadius r;
    for (int order = 3; order <= w.n_max; order += 2) {
        const DeltaPair pair = w.bounds.at(order);
        r.splitting_gap = std::max(r.splitting_gap, (pair.max - pair.min) / pair.max);
    }
    const DeltaPair third = w.bounds.at(3);
    for (std::size_t i = 0; i < w.layout->radial.size(); ++i) {
        const double q2 = w.layout->radial[i];
        const double upper = h2_max(q2, w.lambda);
        r.two_point_gap = std::max(r.two_point_gap, std::abs(upper - h2_min(q2)) / upper);
        r.loop_gap = std::max(r.loop_gap, (third.max - third.min) * w.loop_profile[i] / w.hat3[i]);
    }
    return r;
}

} // namespace phi4
