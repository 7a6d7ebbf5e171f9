#include <catch_amalgamated.hpp>

#include <random>

#include "phi4/mapping4d.hpp"

using namespace phi4;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GreenSequence make_fundamental(double lambda)
{
    auto tree = build_fundamental(lambda, 7, QuadratureConfig{});
    return sample_tree(*tree, std::make_shared<const SampleLayout>(make_layout(7)));
}

const GreenSequence& fundamental_002()
{
    static const GreenSequence green = make_fundamental(0.02);
    return green;
}

MapOptions with_rule(GammaRule rule)
{
    MapOptions options;
    options.gamma = rule;
    return options;
}

} // namespace

TEST_CASE("gamma rule parsing")
{
    CHECK(parse_gamma_rule("input") == GammaRule::input);
    CHECK(parse_gamma_rule("unit") == GammaRule::unit);
    CHECK(std::string(to_string(GammaRule::unit)) == "unit");
    CHECK_THROWS_AS(parse_gamma_rule("other"), config_error);
}

TEST_CASE("global terms carry the expected signs")
{
    const GreenSequence& h = fundamental_002();
    const SplittingBounds bounds = sequence_bounds(h);
    for (double t : {h.layout->scales.front(), h.layout->scales[20], h.layout->scales.back()})
        for (int order = 3; order <= 7; order += 2)
            for (int active = 0; active <= order; ++active) {
                const GlobalTerms terms = global_terms(h, {order, active, t}, bounds);
                const int sign = alternating_sign(order);
                CHECK(terms.c * sign > 0.0);
                CHECK(terms.b * sign < 0.0);
                CHECK(terms.a * sign > 0.0);
                CHECK(terms.closure_used == (order == 7));
            }
}

TEST_CASE("zero-momentum global terms reduce to the zero-dimensional ones")
{
    const double lambda = 0.02;
    const ZeroDimSequence state = solve_zerodim(lambda, 7, 1e-12, 200).sequence;
    GreenSequence h = fundamental_002();
    h.shift.at(0.0) = state.at(1) - 1.0;
    for (int order = 3; order <= 7; order += 2)
        for (int active = 0; active <= order; ++active)
            h.at(order, active, 0) = state.at(order);
    const SplittingBounds bounds = sequence_bounds(h);
    for (int order = 3; order <= 5; order += 2) {
        const double expected = zero_dim_d_term(state, order, state.at(order + 2));
        CHECK_THAT(d_n(h, {order, 0, 0.0}, bounds), WithinRel(expected, 1e-13));
    }
    for (int order = 3; order <= 7; order += 2) {
        const double expected = zero_dim_c_term(order, lambda, [&](int part) { return state.at(part); });
        CHECK_THAT(h.c_term_at(order, 0, 0), WithinRel(expected, 1e-13));
    }
}

TEST_CASE("D_n is positive on the fundamental sequence")
{
    for (double lambda : {0.005, 0.02, 0.05}) {
        const GreenSequence h = make_fundamental(lambda);
        const SplittingBounds bounds = sequence_bounds(h);
        for (double t : h.layout->scales)
            for (int order = 3; order <= 7; order += 2)
                for (int active = 0; active <= order; ++active)
                    CHECK(d_n(h, {order, active, t}, bounds) > 0.0);
    }
}

TEST_CASE("D_n is of order lambda at weak coupling")
{
    const GreenSequence h = make_fundamental(1e-4);
    const SplittingBounds bounds = sequence_bounds(h);
    for (double t : h.layout->scales)
        for (int order = 3; order <= 7; order += 2)
            for (int active = 0; active <= order; ++active) {
                const double d = d_n(h, {order, active, t}, bounds);
                CHECK(d < 3.0 * 1e-4 * order * (order - 1));
                CHECK(d < 0.01);
            }
}

TEST_CASE("asymptotic closure uses the delta_infinity envelope at the truncation order")
{
    MapOptions options = with_rule(GammaRule::unit);
    options.closure = ClosureRule::asymptotic;
    const GreenSequence& h = fundamental_002();
    const MapStep step = apply_mstar_detailed(h, options);
    const SplittingBounds bounds = sequence_bounds(h);
    const double envelope = 3.0 * 0.02 * 7 * 6 / bounds.delta_inf;
    CHECK_THAT(envelope / (3.0 * 0.02 * 7 * 6), WithinRel(1.0 / delta_infinity(0.02, default_d0(0.02)), 1e-14));
    for (std::size_t s = 0; s < h.layout->scales.size(); ++s)
        for (int active = 0; active <= 7; ++active)
            CHECK_THAT(step.d_terms[s][vertex_offset(7) + active], WithinRel(envelope, 1e-14));
    const MapStep tree_step = apply_mstar_detailed(h, with_rule(GammaRule::unit));
    CHECK(tree_step.d_terms[0][vertex_offset(7)] != step.d_terms[0][vertex_offset(7)]);
    CHECK(tree_step.d_terms[0][vertex_offset(5)] == step.d_terms[0][vertex_offset(5)]);
}

TEST_CASE("renormalization constants of the fundamental sequence sit at their minimal values")
{
    const GreenSequence& h = fundamental_002();
    const SplittingBounds bounds = sequence_bounds(h);
    const RenormConstants rc = renorm_constants(h);
    CHECK_THAT(rc.gamma, WithinRel(gamma_max(0.02), 1e-14));
    CHECK_THAT(rc.rho, WithinRel(bounds.constants.rho0, 1e-13));
    CHECK_THAT(rc.a, WithinRel(bounds.constants.a0, 1e-13));
    CHECK_THAT(rc.delta3, WithinRel(delta3_min(0.02), 1e-14));
    CHECK(renorm_envelope(rc, bounds.constants, bounds).all());
    CHECK_THAT(renorm_gamma_at(h, {3, 0, 0.0}), WithinRel(rc.gamma, 1e-14));
    CHECK_THAT(renorm_a_at(h, -1.0), WithinRel(rc.a, 1e-14));
    CHECK_THAT(renorm_rho_at(h, -1.0), WithinRel(rc.rho, 1e-14));
    RenormConstants outside = rc;
    outside.gamma = 2.0 * gamma_max(0.02);
    CHECK_FALSE(renorm_envelope(outside, bounds.constants, bounds).gamma);
}

TEST_CASE("fundamental sequence membership")
{
    const GreenSequence& h = fundamental_002();
    const Membership m = check_membership(h, sequence_bounds(h));
    CHECK(m.in_phi_r());
    CHECK(m.h2_lower);
    // the plain sunset grows faster than the H^2_max envelope at large momenta
    CHECK_FALSE(m.h2_upper);
    CHECK(m.worst_h2_upper > 0.5);
}

TEST_CASE("unit gamma rule keeps zero-momentum splittings inside their bounds")
{
    const GreenSequence& h = fundamental_002();
    const SplittingBounds bounds = sequence_bounds(h);
    const MapStep step = apply_mstar_detailed(h, with_rule(GammaRule::unit));
    CHECK(step.gamma_used == 1.0);
    for (int order = 3; order <= 7; order += 2)
        for (int active = 0; active <= order; ++active) {
            const double delta = step.deltas[0][vertex_offset(order) + active];
            CHECK(delta >= bounds.at(order).min);
            CHECK(delta <= bounds.at(order).max);
            CHECK_THAT(splitting_at(step.next, {order, active, 0.0}), WithinRel(delta, 1e-12));
        }
    CHECK(signs_alternate(step.next));
}

TEST_CASE("input gamma rule pushes delta_3 below its lower bound")
{
    const GreenSequence& h = fundamental_002();
    const SplittingBounds bounds = sequence_bounds(h);
    const MapStep step = apply_mstar_detailed(h, with_rule(GammaRule::input));
    CHECK_THAT(step.gamma_used, WithinRel(gamma_max(0.02), 1e-14));
    const double delta3 = step.deltas[0][0];
    CHECK(delta3 < bounds.at(3).min);
    // 1/delta_3' = 1/delta_3 + (rho~ + D_3 - Lambda a~) / (6 Lambda)
    const RenormConstants rc = step.constants;
    const double expected = 1.0 / (1.0 / rc.delta3 + (rc.rho + step.d_terms[0][0] - 0.02 * rc.a) / (6.0 * 0.02));
    CHECK_THAT(delta3, WithinRel(expected, 1e-13));
    CHECK_FALSE(check_membership(step.next, bounds).splitting);
    CHECK_THROWS_AS(apply_mstar(step.next, with_rule(GammaRule::input)), numerical_error);
}

TEST_CASE("image two-point function is normalized at the mass shell")
{
    for (GammaRule rule : {GammaRule::unit, GammaRule::input}) {
        const GreenSequence next = apply_mstar(fundamental_002(), with_rule(rule));
        CHECK_THAT(next.amputated_two_point(-1.0 + 1e-6), WithinAbs(1.0, 1e-3));
    }
    MapOptions options = with_rule(GammaRule::unit);
    options.check_membership = false;
    GreenSequence h = fundamental_002();
    for (int step = 0; step < 4; ++step) {
        h = apply_mstar(h, options);
        CHECK_THAT(h.amputated_two_point(-1.0 + 1e-6), WithinAbs(1.0, 1e-3));
    }
}

TEST_CASE("without the shell subtraction the a~ term destabilizes the shell neighborhood")
{
    MapOptions options = with_rule(GammaRule::unit);
    options.check_membership = false;
    options.shell_subtracted = false;
    GreenSequence h = fundamental_002();
    double first = 0.0;
    for (int step = 0; step < 4; ++step) {
        h = apply_mstar(h, options);
        if (step == 0)
            first = std::abs(h.amputated_two_point(-1.0 + 1e-6) - 1.0);
    }
    CHECK(first < 1e-3);
    CHECK(std::abs(h.amputated_two_point(-1.0 + 1e-6) - 1.0) > 1.0);
}

TEST_CASE("image H4 factorizes with the updated splitting")
{
    const GreenSequence& h = fundamental_002();
    const MapStep step = apply_mstar_detailed(h, with_rule(GammaRule::unit));
    for (std::size_t s = 0; s < h.layout->scales.size(); ++s) {
        const double t = h.layout->scales[s];
        for (int active = 0; active <= 3; ++active) {
            double product = 1.0;
            for (int leg = 0; leg < 3; ++leg)
                product *= step.next.amputated_two_point(block_invariant(leg < active ? 1 : 0, t));
            CHECK_THAT(step.next.at(3, active, s), WithinRel(-step.deltas[s][active] * product, 1e-13));
        }
    }
}

TEST_CASE("splitting update is equivalent to the global-term form")
{
    const GreenSequence& h = fundamental_002();
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick_scale(0, h.layout->scales.size() - 1);
    for (GammaRule rule : {GammaRule::unit, GammaRule::input}) {
        const MapOptions options = with_rule(rule);
        const MapStep step = apply_mstar_detailed(h, options);
        for (int trial = 0; trial < 3; ++trial) {
            const double t = h.layout->scales[pick_scale(rng)];
            for (int order = 3; order <= 7; order += 2) {
                std::uniform_int_distribution<int> pick_active(0, order);
                CHECK(mstar_equivalence_residual(h, step, {order, pick_active(rng), t}, options) < 1e-10);
            }
        }
    }
}

TEST_CASE("the mapping refuses sequences outside Phi_R")
{
    GreenSequence h = fundamental_002();
    h.at(5, 1, 4) *= -1.0;
    CHECK_THROWS_AS(apply_mstar(h), numerical_error);
    MapOptions lenient;
    lenient.check_membership = false;
    CHECK_NOTHROW(apply_mstar(h, lenient));
}

TEST_CASE("flipping the rho sign shifts the two-point image by a constant")
{
    const GreenSequence& h = fundamental_002();
    MapOptions flipped = with_rule(GammaRule::unit);
    flipped.flip_rho = true;
    const MapStep plain = apply_mstar_detailed(h, with_rule(GammaRule::unit));
    const MapStep other = apply_mstar_detailed(h, flipped);
    const double expected = 2.0 * plain.constants.rho / (1.0 + plain.constants.rho);
    for (double q2 : {0.0, h.layout->radial[10], h.layout->radial[50]})
        CHECK_THAT(other.next.shift.at(q2) - plain.next.shift.at(q2), WithinAbs(expected, 1e-15));
}

TEST_CASE("mapping is deterministic")
{
    const GreenSequence first = apply_mstar(fundamental_002(), with_rule(GammaRule::unit));
    const GreenSequence second = apply_mstar(fundamental_002(), with_rule(GammaRule::unit));
    CHECK(first.vertex == second.vertex);
    CHECK(first.shift == second.shift);
    CHECK(first.iterate == 1);
}
