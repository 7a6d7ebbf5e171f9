#include <catch_amalgamated.hpp>

#include <random>

#include "phi4/norms.hpp"

using namespace phi4;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Fixture {
    std::shared_ptr<TreeSequence> tree;
    GreenSequence green;
    NormWeights weights;
};

Fixture make_fixture(double lambda)
{
    Fixture f;
    f.tree = build_fundamental(lambda, 7, QuadratureConfig{});
    auto layout = std::make_shared<const SampleLayout>(make_layout(7));
    f.green = sample_tree(*f.tree, layout);
    f.weights = make_norm_weights(lambda, layout, f.tree->channel);
    return f;
}

const Fixture& fundamental_004()
{
    static const Fixture fixture = make_fixture(0.04);
    return fixture;
}

GreenSequence perturbed(const GreenSequence& base, std::mt19937_64& rng, double size)
{
    std::uniform_real_distribution<double> uniform(-size, size);
    GreenSequence out = base;
    for (auto& [q2, shift] : out.shift)
        if (q2 != -1.0)
            shift += uniform(rng) * (1.0 + shift);
    for (auto& row : out.vertex)
        for (double& value : row)
            value *= 1.0 + uniform(rng);
    return out;
}

GreenSequence scaled(const GreenSequence& base, double factor)
{
    GreenSequence out = base;
    for (auto& [q2, shift] : out.shift)
        shift = factor * (1.0 + shift) - 1.0;
    for (auto& row : out.vertex)
        for (double& value : row)
            value *= factor;
    return out;
}

} // namespace

TEST_CASE("M1 spot value")
{
    CHECK_THAT(weight_m1(0.0, 0.05), WithinRel(10.19725, 1e-12));
    CHECK_THROWS_AS(weight_m1(-0.5, 0.05), config_error);
}

TEST_CASE("M1 dominates the two-point envelope on the radial grid")
{
    for (double lambda : {0.005, 0.02, 0.04, 0.05})
        for (double q2 : radial_grid()) {
            CHECK(weight_m1(q2, lambda) > h2_max(q2, lambda));
            CHECK(h2_max(q2, lambda) > h2_min(q2));
        }
}

TEST_CASE("envelope ratio H2max/M1 at large momenta")
{
    // the ratio falls like (q^2+1)^(-pi^2/54)/6 instead of settling at 6 Lambda^2
    const double ratio = h2_max(1e6, 0.04) / weight_m1(1e6, 0.04);
    const double shifted = 1e6 + 1.0;
    const double expected = (1.0 + 6.0 * 0.04 * 0.04 * std::pow(shifted, M_PI * M_PI / 54.0 - 1.0)) /
                            (1.0 + 6.0 * std::pow(shifted, M_PI * M_PI / 54.0));
    CHECK_THAT(ratio, WithinRel(expected, 1e-12));
    CHECK(h2_max(1e6, 0.04) / weight_m1(1e6, 0.04) < h2_max(1e3, 0.04) / weight_m1(1e3, 0.04));
}

TEST_CASE("weights are strictly positive")
{
    const auto& w = fundamental_004().weights;
    for (double value : w.m1)
        CHECK(value > 0.0);
    for (double value : w.hat3)
        CHECK(value > 0.0);
    for (double value : w.loop_profile)
        CHECK(value > 0.0);
    for (std::size_t s = 0; s < w.mn.size(); ++s)
        for (std::size_t k = 0; k < w.mn[s].size(); ++k) {
            CHECK(w.mn[s][k] > 0.0);
            CHECK(w.soft[s][k] > 0.0);
        }
    CHECK(w.gamma_weight > 0.0);
}

TEST_CASE("vertex weights follow the recursion")
{
    const auto& w = fundamental_004().weights;
    const double lambda = 0.04;
    for (std::size_t s = 0; s < w.layout->scales.size(); ++s) {
        const double t = w.layout->scales[s];
        const double leg = gamma_max(lambda) * (t * t + 1.0) * (1.0 + 6.0 * std::pow(t * t + 1.0, M_PI * M_PI / 54.0)) /
                           (t * t + 1.0);
        CHECK_THAT(w.mn[s][0], WithinRel(6.0 * lambda * leg * leg * leg, 1e-13));
        CHECK_THAT(w.soft[s][0], WithinRel(6.0 * lambda * leg * leg, 1e-13));
        for (int order = 5; order <= 7; order += 2) {
            const std::size_t k = order_index(order);
            const double inner = 1.0 / ((order - 2) * (order - 2) * t * t + 1.0);
            const double expected = order * (order - 1) * w.bounds.at(order).max * w.mn[s][k - 1] * inner * leg * leg;
            CHECK_THAT(w.mn[s][k], WithinRel(expected, 1e-13));
            CHECK_THAT(w.soft[s][k], WithinRel(order * (order - 1) * w.bounds.at(order).max * w.mn[s][k - 1] * leg, 1e-13));
        }
    }
}

TEST_CASE("norm of the zero sequence vanishes")
{
    GreenSequence zero = empty_like(fundamental_004().green);
    for (auto& [q2, shift] : zero.shift)
        shift = -1.0;
    CHECK(banach_norm(zero, fundamental_004().weights) == 0.0);
}

TEST_CASE("fundamental sequence norm at lambda 0.04")
{
    const auto& f = fundamental_004();
    const NormBreakdown parts = norm_breakdown(f.green, f.weights);
    CHECK(parts.total() <= 1.0);
    CHECK(parts.total() > 0.0);
    CHECK(parts.two_point <= 1.0);
    CHECK(parts.vertex <= 1.0);
    CHECK(parts.soft <= 1.0);
    CHECK(parts.loop <= 1.0);
    CHECK(parts.gamma <= 1.0);
    // regression baseline
    CHECK_THAT(parts.total(), WithinRel(0.10593899294588367, 1e-6));
}

TEST_CASE("linear norm families are homogeneous")
{
    const auto& f = fundamental_004();
    const NormBreakdown base = norm_breakdown(f.green, f.weights);
    const NormBreakdown twice = norm_breakdown(scaled(f.green, 2.0), f.weights);
    CHECK_THAT(twice.two_point, WithinRel(2.0 * base.two_point, 1e-13));
    CHECK_THAT(twice.vertex, WithinRel(2.0 * base.vertex, 1e-13));
    CHECK_THAT(twice.soft, WithinRel(2.0 * base.soft, 1e-13));
    // the loop and gamma entries are ratios of H^4 and H^2 and are not homogeneous
    CHECK_THAT(twice.loop, WithinRel(base.loop / 4.0, 1e-13));
    CHECK_THAT(twice.gamma, WithinRel(4.0 * base.gamma, 1e-13));
}

TEST_CASE("distance is a metric on perturbed trees")
{
    const auto& f = fundamental_004();
    std::mt19937_64 rng(2024);
    CHECK(distance(f.green, f.green, f.weights) == 0.0);
    for (int trial = 0; trial < 100; ++trial) {
        const GreenSequence a = perturbed(f.green, rng, 0.05);
        const GreenSequence b = perturbed(f.green, rng, 0.05);
        const GreenSequence c = perturbed(f.green, rng, 0.05);
        const double ab = distance(a, b, f.weights);
        const double bc = distance(b, c, f.weights);
        const double ac = distance(a, c, f.weights);
        CHECK(ab == distance(b, a, f.weights));
        CHECK(ab > 0.0);
        CHECK(ac <= ab + bc + 1e-15);
    }
}

TEST_CASE("distance rejects mismatched layouts")
{
    const auto& f = fundamental_004();
    LayoutSpec spec;
    spec.vertex_scales = 4;
    const GreenSequence other = sample_tree(*f.tree, std::make_shared<const SampleLayout>(make_layout(7, spec)));
    CHECK_THROWS_AS(distance(f.green, other, f.weights), config_error);
}

TEST_CASE("norm is stable under radial grid refinement")
{
    const auto& f = fundamental_004();
    LayoutSpec spec;
    spec.radial.points = 128;
    auto layout = std::make_shared<const SampleLayout>(make_layout(7, spec));
    const GreenSequence fine = sample_tree(*f.tree, layout);
    const NormWeights weights = make_norm_weights(0.04, layout, f.tree->channel);
    const double coarse_norm = banach_norm(f.green, f.weights);
    CHECK_THAT(banach_norm(fine, weights), WithinRel(coarse_norm, 0.02));
}

TEST_CASE("ball radius at lambda 0.04")
{
    const BallRadius r = ball_radius_r0(fundamental_004().weights);
    CHECK(r.value() > 0.0);
    CHECK(r.value() <= 1.0);
    CHECK(r.splitting_gap > 0.0);
    CHECK(r.splitting_gap < 1.0);
    // regression baselines
    CHECK_THAT(r.value(), WithinRel(0.83210310980297841, 1e-12));
    CHECK_THAT(r.two_point_gap, WithinRel(0.27354307487830165, 1e-12));
    CHECK_THAT(r.loop_gap, WithinRel(0.00016006066741450269, 1e-4));
}

TEST_CASE("splitting gap vanishes with the coupling")
{
    const double lambda = 1e-6;
    const SplittingBounds bounds =
        make_splitting_bounds(lambda, renorm_bound_constants(lambda, Mode::four_dim, ShellLoopValues{-0.2, 0.1}),
                              default_d0(lambda), 9);
    for (int order = 3; order <= 7; order += 2) {
        const DeltaPair pair = bounds.at(order);
        const double gap = (pair.max - pair.min) / pair.max;
        CHECK(gap > 0.0);
        CHECK(gap < 200.0 * lambda);
        CHECK_THAT(pair.max / (3.0 * lambda * order * (order - 1)), WithinAbs(order == 3 ? 2.0 / (order * (order - 1)) : 1.0, 1e-3));
    }
}
