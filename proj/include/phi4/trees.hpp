#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "combinatorics.hpp"
#include "error.hpp"
#include "grids.hpp"
#include "loops.hpp"
#include "parallel.hpp"
#include "splitting.hpp"
#include "zerodim.hpp"

namespace phi4 {

inline double propagator(double q2)
{
    return 1.0 / (q2 + 1.0);
}

/**
 * Collinear scale configuration of an order-n vertex: `active` of the n independent external momenta equal
 * t times a fixed unit vector, the remaining ones vanish. A block holding c active legs carries (c t)^2.
 */
struct MomentumConfig {
    int order = 3;
    int active = 0;
    double scale = 0.0;
};

inline void validate(const MomentumConfig& config)
{
    require(config.order >= 1 && config.order % 2 == 1, "momentum config: order must be odd and positive");
    require(config.active >= 0 && config.active <= config.order, "momentum config: active legs must lie in [0, order]");
    require(config.scale >= 0.0 && std::isfinite(config.scale), "momentum config: scale must be finite and >= 0");
}

/** Invariant (c t)^2 of a block with c active legs; exact zero at t = 0. */
inline double block_invariant(int count, double scale)
{
    const double momentum = count * scale;
    return momentum * momentum;
}

inline double factorial_value(int k)
{
    double result = 1.0;
    for (int i = 2; i <= k; ++i)
        result *= i;
    return result;
}

inline double binomial_value(int total, int chosen)
{
    if (chosen < 0 || chosen > total)
        return 0.0;
    return factorial_value(total) / (factorial_value(chosen) * factorial_value(total - chosen));
}

/** Denominator of the splitting law: 6 Lambda for n = 3, 3 Lambda n(n-1) above. */
inline double splitting_normalization(int order, double lambda)
{
    return order == 3 ? 6.0 * lambda : 3.0 * lambda * order * (order - 1);
}

/**
 * C-term -Lambda sum over ordered odd compositions (i1, i2, i3) of `order` and over the ways of distributing
 * the active legs among the blocks. block(part, count) returns the N_1-multiplied block value
 * H^{part+1} Delta_F of a block with `count` active legs.
 */
template <class Block>
double c_term(int order, int active, double lambda, Block&& block)
{
    require_odd_order(order, 3, "c_term");
    require(active >= 0 && active <= order, "c_term: active legs must lie in [0, order]");
    const int passive = order - active;
    double sum = 0.0;
    for (int first = 1; first <= order - 2; first += 2) {
        for (int second = 1; first + second <= order - 1; second += 2) {
            const int third = order - first - second;
            const int parts[3] = {first, second, third};
            for (int c1 = 0; c1 <= std::min(first, active); ++c1) {
                for (int c2 = 0; c2 <= std::min(second, active - c1); ++c2) {
                    const int c3 = active - c1 - c2;
                    if (c3 > third)
                        continue;
                    const int counts[3] = {c1, c2, c3};
                    double weight = factorial_value(active) * factorial_value(passive);
                    double product = 1.0;
                    for (int b = 0; b < 3; ++b) {
                        weight /= factorial_value(counts[b]) * factorial_value(parts[b] - counts[b]);
                        product *= block(parts[b], counts[b]);
                    }
                    sum += weight * product;
                }
            }
        }
    }
    return -lambda * sum;
}

/** Momentum layout shared by every sampled sequence of one run. */
struct SampleLayout {
    int n_max = 0;
    std::vector<double> radial;      // q^2 grid of the two-point norm family
    std::vector<double> scales;      // t values carrying the full vertex tower, scales[0] = 0
    std::vector<double> invariants;  // every q^2 at which the two-point function is held, ascending
};

struct LayoutSpec {
    RadialGridSpec radial;
    int vertex_scales = 8;
    double scale_low = 0.1;
    double scale_high = 1e3;
};

/** Scales: t = 0, t = sqrt(q^2) over the radial grid (H^4 on the full grid) and the vertex scale points. */
inline SampleLayout make_layout(int n_max, const LayoutSpec& spec = {})
{
    require_odd_order(n_max, 3, "make_layout");
    require(spec.vertex_scales >= 2, "layout: need at least two vertex scales");
    SampleLayout layout;
    layout.n_max = n_max;
    layout.radial = radial_grid(spec.radial);
    std::vector<double> scales{0.0};
    for (double q2 : layout.radial)
        scales.push_back(std::sqrt(q2));
    for (double t : geometric_grid(spec.scale_low, spec.scale_high, spec.vertex_scales))
        scales.push_back(t);
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
    layout.scales = scales;
    std::vector<double> invariants = layout.radial;
    for (double q2 : shell_neighborhood())
        invariants.push_back(q2);
    for (double t : scales)
        for (int count = 0; count <= n_max; ++count)
            invariants.push_back(block_invariant(count, t));
    std::sort(invariants.begin(), invariants.end());
    invariants.erase(std::unique(invariants.begin(), invariants.end()), invariants.end());
    layout.invariants = invariants;
    return layout;
}

inline std::size_t scale_index(const SampleLayout& layout, double scale)
{
    const auto it = std::lower_bound(layout.scales.begin(), layout.scales.end(), scale);
    if (it == layout.scales.end() || *it != scale)
        throw config_error("scale " + format_number(scale) + " is not part of the sample layout");
    return static_cast<std::size_t>(it - layout.scales.begin());
}

/**
 * Zero-momentum sunset kernel N(q^2) of the chosen variant, scaled as in n3_tilde, with memoized values and
 * derivatives. Safe for concurrent reads and inserts.
 */
class SunsetChannel {
public:
    SunsetChannel(SunsetVariant variant, double lambda, const QuadratureConfig& cfg)
        : variant_(variant), scale_(variant_scale(variant, lambda)), cfg_(cfg)
    {
        validate(cfg);
        shell_ = value_result(-1.0);
        shell_slope_ = derivative_result(-1.0);
    }

    SunsetVariant variant() const { return variant_; }
    const QuadratureConfig& config() const { return cfg_; }
    double shell_value() const { return scale_ * shell_.value; }
    double shell_derivative() const { return scale_ * shell_slope_.value; }
    ShellLoopValues shell() const { return {shell_value(), shell_derivative()}; }

    double value(double q2) const { return scale_ * value_result(q2).value; }
    double derivative(double q2) const { return scale_ * derivative_result(q2).value; }
    double value_error(double q2) const { return scale_ * value_result(q2).error_estimate; }
    double derivative_error(double q2) const { return scale_ * derivative_result(q2).error_estimate; }

    /** (N(q^2) - N(-m^2)) / (q^2 + m^2), by Simpson's rule on N' next to the shell to avoid cancellation. */
    double shell_difference_quotient(double q2) const
    {
        const double shift = q2 + 1.0;
        require(shift >= 0.0, "shell_difference_quotient: q^2 below the mass shell");
        if (shift == 0.0)
            return shell_derivative();
        if (shift < near_shell())
            return (shell_derivative() + 4.0 * derivative(-1.0 + shift / 2.0) + derivative(q2)) / 6.0;
        return (value(q2) - shell_value()) / shift;
    }

    /** Evaluates all missing values and derivatives in parallel. */
    void prefetch(const std::vector<double>& points, bool derivatives = false) const
    {
        std::vector<double> needed;
        for (double q2 : points) {
            needed.push_back(q2);
            const double shift = q2 + 1.0;
            if (shift > 0.0 && shift < near_shell()) {
                needed.push_back(-1.0 + shift / 2.0);
            }
        }
        fill(values_, needed, false);
        std::vector<double> slopes;
        for (double q2 : needed)
            if (derivatives || q2 + 1.0 < near_shell())
                slopes.push_back(q2);
        fill(derivatives_, slopes, true);
    }

private:
    static double near_shell() { return 1e-2; }

    LoopResult compute(double q2, bool derivative) const
    {
        return derivative ? sunset_kernel_derivative(q2, variant_, cfg_) : sunset_kernel(q2, variant_, cfg_);
    }

    LoopResult lookup(std::map<double, LoopResult>& memo, double q2, bool derivative) const
    {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto it = memo.find(q2);
            if (it != memo.end())
                return it->second;
        }
        const LoopResult result = compute(q2, derivative);
        std::lock_guard<std::mutex> lock(mutex_);
        memo.emplace(q2, result);
        return result;
    }

    LoopResult value_result(double q2) const { return lookup(values_, q2, false); }
    LoopResult derivative_result(double q2) const { return lookup(derivatives_, q2, true); }

    void fill(std::map<double, LoopResult>& memo, std::vector<double> points, bool derivative) const
    {
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());
        {
            std::lock_guard<std::mutex> lock(mutex_);
            std::erase_if(points, [&](double q2) { return memo.count(q2) > 0; });
        }
        std::vector<LoopResult> results(points.size());
        parallel_for(points.size(), [&](std::size_t i) { results[i] = compute(points[i], derivative); });
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < points.size(); ++i)
            memo.emplace(points[i], results[i]);
    }

    SunsetVariant variant_;
    double scale_;
    QuadratureConfig cfg_;
    LoopResult shell_;
    LoopResult shell_slope_;
    mutable std::mutex mutex_;
    mutable std::map<double, LoopResult> values_;
    mutable std::map<double, LoopResult> derivatives_;
};

inline std::size_t vertex_offset(int order)
{
    const std::size_t j = static_cast<std::size_t>((order - 3) / 2);
    return j * (j + 3);
}

/**
 * Sampled Green's sequence: the two-point function H^2 = (q^2+1)(1 + shift) held at every layout invariant
 * and the vertex values H^{n+1}(n, active, t) for odd 3 <= n <= n_max at every layout scale.
 */
struct GreenSequence {
    double lambda = 0.0;
    int n_max = 0;
    int iterate = 0;
    std::shared_ptr<const SampleLayout> layout;
    std::shared_ptr<const SunsetChannel> channel;
    std::map<double, double> shift;
    std::vector<std::vector<double>> vertex;

    /** H^2 Delta_F at q^2, i.e. 1 + delta_1 Delta_F. */
    double amputated_two_point(double q2) const
    {
        const auto it = shift.find(q2);
        if (it == shift.end())
            throw config_error("two-point function not sampled at q^2 = " + format_number(q2));
        return 1.0 + it->second;
    }

    double two_point(double q2) const { return (q2 + 1.0) * amputated_two_point(q2); }

    double at(int order, int active, std::size_t scale) const
    {
        return vertex.at(scale).at(vertex_offset(order) + static_cast<std::size_t>(active));
    }

    double& at(int order, int active, std::size_t scale)
    {
        return vertex.at(scale).at(vertex_offset(order) + static_cast<std::size_t>(active));
    }

    /** N_1-multiplied block value of `part` legs with `count` active at layout scale index `scale`. */
    double block(int part, int count, std::size_t scale) const
    {
        const double t = layout->scales[scale];
        if (part == 1)
            return amputated_two_point(block_invariant(count, t));
        return at(part, count, scale) * propagator(block_invariant(count, t));
    }

    double c_term_at(int order, int active, std::size_t scale) const
    {
        return c_term(order, active, lambda, [&](int part, int count) { return block(part, count, scale); });
    }
};

inline GreenSequence empty_like(const GreenSequence& model)
{
    GreenSequence out;
    out.lambda = model.lambda;
    out.n_max = model.n_max;
    out.iterate = model.iterate;
    out.layout = model.layout;
    out.channel = model.channel;
    for (const auto& [q2, value] : model.shift)
        out.shift.emplace(q2, 0.0);
    out.vertex.assign(model.vertex.size(), std::vector<double>(model.vertex.front().size(), 0.0));
    return out;
}

/** Tree-type sequence with constant splitting coefficients and the shell-normalized two-point function. */
struct TreeSequence {
    double lambda = 0.0;
    int n_max = 0;
    std::shared_ptr<const SunsetChannel> channel;
    RenormBoundConstants constants;
    SplittingBounds bounds;
    std::map<int, double> splitting;  // delta_n for odd n >= 3
    double delta3 = 0.0;              // delta_{3,min} entering delta_10
    double b0 = 1.0;
    double b1 = 0.0;
    std::vector<double> h2_grid;
    std::vector<double> h2_values;

    /** delta_10 Delta_F = (-rho_0 + Lambda delta_3 ([N3] - [N3]_shell) Delta_F) / (1 + rho_0). */
    double two_point_shift(double q2) const
    {
        if (q2 == -1.0)
            return 0.0;
        const double rho0 = constants.rho0;
        return (-rho0 + lambda * delta3 * channel->shell_difference_quotient(q2)) / (1.0 + rho0);
    }

    double two_point(double q2) const { return (q2 + 1.0) * (1.0 + two_point_shift(q2)); }

    mutable std::mutex cache_mutex;
    mutable std::map<std::tuple<int, int, double>, double> cache;
};

struct FundamentalOptions {
    SunsetVariant variant = SunsetVariant::plain;
    double d0 = -1.0;  // negative selects the default 0.03 * lambda
    RadialGridSpec grid;
};

inline std::shared_ptr<TreeSequence> build_fundamental(double lambda, int n_max, const QuadratureConfig& cfg,
                                                       const FundamentalOptions& options = {},
                                                       std::shared_ptr<const SunsetChannel> channel = nullptr)
{
    require(lambda > 0.0 && lambda <= 0.05, "build_fundamental: lambda must lie in (0, 0.05]");
    require_odd_order(n_max, 3, "build_fundamental");
    if (!channel)
        channel = std::make_shared<SunsetChannel>(options.variant, lambda, cfg);
    require(channel->variant() == options.variant, "build_fundamental: channel variant mismatch");
    auto tree = std::make_shared<TreeSequence>();
    tree->lambda = lambda;
    tree->n_max = n_max;
    tree->channel = channel;
    tree->constants = renorm_bound_constants(lambda, Mode::four_dim, channel->shell());
    const double d0 = options.d0 < 0.0 ? default_d0(lambda) : options.d0;
    tree->bounds = make_splitting_bounds(lambda, tree->constants, d0, n_max + 2);
    for (const auto& [order, pair] : tree->bounds.table)
        tree->splitting[order] = pair.min;
    tree->delta3 = tree->splitting.at(3);
    tree->h2_grid = radial_grid(options.grid);
    channel->prefetch(tree->h2_grid);
    tree->b0 = 1.0;
    for (double q2 : tree->h2_grid) {
        const double shift = tree->two_point_shift(q2);
        tree->h2_values.push_back((q2 + 1.0) * (1.0 + shift));
        tree->b1 = std::max(tree->b1, shift / std::pow(q2 + 1.0, 1.0 + M_PI * M_PI / 18.0));
    }
    return tree;
}

/** H^{n+1} of a tree sequence at a collinear configuration; order 1 returns H^2 of the single momentum. */
inline double eval_tree(const TreeSequence& tree, const MomentumConfig& config)
{
    validate(config);
    if (config.order > tree.n_max + 2)
        throw config_error("eval_tree: order " + std::to_string(config.order) + " exceeds the tabulated splitting");
    if (config.order == 1)
        return tree.two_point(block_invariant(config.active, config.scale));
    const auto key = std::make_tuple(config.order, config.active, config.scale);
    {
        std::lock_guard<std::mutex> lock(tree.cache_mutex);
        const auto it = tree.cache.find(key);
        if (it != tree.cache.end())
            return it->second;
    }
    auto block = [&](int part, int count) {
        const double q2 = block_invariant(count, config.scale);
        if (part == 1)
            return 1.0 + tree.two_point_shift(q2);
        return eval_tree(tree, {part, count, config.scale}) * propagator(q2);
    };
    const double c = c_term(config.order, config.active, tree.lambda, block);
    const double value = tree.splitting.at(config.order) * c / splitting_normalization(config.order, tree.lambda);
    std::lock_guard<std::mutex> lock(tree.cache_mutex);
    tree.cache.emplace(key, value);
    return value;
}

/** Samples a tree sequence on a layout. */
inline GreenSequence sample_tree(const TreeSequence& tree, std::shared_ptr<const SampleLayout> layout)
{
    require(layout->n_max == tree.n_max, "sample_tree: layout truncation differs from the tree sequence");
    tree.channel->prefetch(layout->invariants);
    GreenSequence out;
    out.lambda = tree.lambda;
    out.n_max = tree.n_max;
    out.layout = layout;
    out.channel = tree.channel;
    for (double q2 : layout->invariants)
        out.shift.emplace(q2, tree.two_point_shift(q2));
    const std::size_t slots = vertex_offset(tree.n_max + 2);
    out.vertex.assign(layout->scales.size(), std::vector<double>(slots, 0.0));
    for (std::size_t s = 0; s < layout->scales.size(); ++s)
        for (int order = 3; order <= tree.n_max; order += 2)
            for (int active = 0; active <= order; ++active)
                out.at(order, active, s) = eval_tree(tree, {order, active, layout->scales[s]});
    return out;
}

inline GreenSequence fundamental_sequence(double lambda, int n_max, const QuadratureConfig& cfg,
                                          const FundamentalOptions& options = {}, const LayoutSpec& layout = {})
{
    auto tree = build_fundamental(lambda, n_max, cfg, options);
    return sample_tree(*tree, std::make_shared<const SampleLayout>(make_layout(n_max, layout)));
}

/** delta_n = norm_n H^{n+1} / C^{n+1} at a layout configuration. */
inline double splitting_at(const GreenSequence& green, const MomentumConfig& config)
{
    validate(config);
    require_odd_order(config.order, 3, "splitting_at");
    require(config.order <= green.n_max, "splitting_at: order exceeds n_max");
    const std::size_t s = scale_index(*green.layout, config.scale);
    const double c = green.c_term_at(config.order, config.active, s);
    if (c == 0.0)
        throw numerical_error("splitting_at: vanishing C-term");
    return splitting_normalization(config.order, green.lambda) * green.at(config.order, config.active, s) / c;
}

inline double splitting_at(const TreeSequence& tree, const MomentumConfig& config)
{
    validate(config);
    require_odd_order(config.order, 3, "splitting_at");
    auto block = [&](int part, int count) {
        const double q2 = block_invariant(count, config.scale);
        if (part == 1)
            return 1.0 + tree.two_point_shift(q2);
        return eval_tree(tree, {part, count, config.scale}) * propagator(q2);
    };
    const double c = c_term(config.order, config.active, tree.lambda, block);
    if (c == 0.0)
        throw numerical_error("splitting_at: vanishing C-term");
    return splitting_normalization(config.order, tree.lambda) * eval_tree(tree, config) / c;
}

/** Sign (-1)^((n-1)/2) at every sampled vertex and H^2 > 0 at every invariant. */
inline bool signs_alternate(const GreenSequence& green)
{
    for (const auto& [q2, shift] : green.shift)
        if (!(1.0 + shift > 0.0))
            return false;
    for (std::size_t s = 0; s < green.vertex.size(); ++s)
        for (int order = 3; order <= green.n_max; order += 2)
            for (int active = 0; active <= order; ++active) {
                const double value = green.at(order, active, s);
                if (!(value * alternating_sign(order) > 0.0))
                    return false;
            }
    return true;
}

} // namespace phi4
