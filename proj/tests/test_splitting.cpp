#include <catch_amalgamated.hpp>

#include "phi4/splitting.hpp"

using namespace phi4;
using Catch::Matchers::WithinRel;

TEST_CASE("gamma_max and delta3_min closed forms")
{
    CHECK_THAT(gamma_max(0.05), WithinRel(1.45675, 1e-14));
    CHECK_THAT(delta3_min(0.05), WithinRel(0.3 / 1.45675, 1e-14));
    CHECK(delta3_min(0.05) == Catch::Approx(0.20594).epsilon(1e-4));
    CHECK_THAT(delta3_min(1e-6) / 1e-6, WithinRel(6.0, 1e-4));
}

TEST_CASE("zero coupling gives vanishing bounds")
{
    const auto constants = renorm_bound_constants(0.0, Mode::zero_dim);
    for (int order = 3; order <= 11; order += 2) {
        const auto bounds = delta_bounds(order, 0.0, constants, 0.0);
        CHECK(bounds.min == 0.0);
        CHECK(bounds.max == 0.0);
    }
}

TEST_CASE("delta_infinity")
{
    CHECK_THAT(delta_infinity(0.02, default_d0(0.02)), WithinRel(100.0, 1e-12));
    CHECK_THAT(delta_infinity(0.05, 0.15), WithinRel(1.0, 1e-12));
    CHECK_THROWS_AS(delta_infinity(0.05, 0.0), config_error);

    const auto constants = renorm_bound_constants(0.05, Mode::zero_dim);
    const double top = delta_bounds(199, 0.05, constants, 0.15).max;
    CHECK(std::abs(top - 1.0) < 0.05);
}

TEST_CASE("renormalization constants")
{
    const auto zero = renorm_bound_constants(0.03, Mode::zero_dim);
    CHECK(zero.gamma0 == 1.0);
    CHECK(zero.a0 == 0.0);
    CHECK(zero.rho0 == 0.0);
    CHECK_THROWS_AS(renorm_bound_constants(0.03, Mode::four_dim), config_error);

    const ShellLoopValues loop{1.5, -3.0};
    const auto four = renorm_bound_constants(0.03, Mode::four_dim, loop);
    CHECK(four.gamma0 == 1.0);
    CHECK_THAT(four.a0, WithinRel(-delta3_min(0.03) * 1.5, 1e-14));
    CHECK_THAT(four.rho0, WithinRel(0.03 * delta3_min(0.03) * -3.0, 1e-14));
    CHECK_THAT(four.a_max, WithinRel(6.0 * 0.03 * 1.5, 1e-14));
    CHECK_THAT(four.rho_max, WithinRel(6.0 * 0.03 * 0.03 * -3.0, 1e-14));
}

TEST_CASE("bounds are ordered and increasing in n over the coupling grid")
{
    for (int step = 1; step <= 10; ++step) {
        const double lambda = 0.005 * step;
        const auto constants = renorm_bound_constants(lambda, Mode::zero_dim);
        const auto table = make_splitting_bounds(lambda, constants, default_d0(lambda), 199);
        DeltaPair previous{0.0, 0.0};
        for (const auto& [order, bounds] : table.table) {
            CAPTURE(lambda, order);
            CHECK(bounds.min > 0.0);
            CHECK(bounds.min < bounds.max);
            CHECK(bounds.min > previous.min);
            CHECK(bounds.max > previous.max);
            CHECK(bounds.max < table.delta_inf);
            previous = bounds;
        }
    }
}

TEST_CASE("small-coupling limit of the lower bound")
{
    const double lambda = 1e-6;
    const auto constants = renorm_bound_constants(lambda, Mode::zero_dim);
    for (int order = 5; order <= 15; order += 2) {
        const auto bounds = delta_bounds(order, lambda, constants, default_d0(lambda));
        CHECK_THAT(bounds.min / lambda, WithinRel(3.0 * order * (order - 1), 1e-3));
        const auto smaller = delta_bounds(order, lambda / 10, constants, default_d0(lambda / 10));
        CHECK(std::abs(smaller.min / (lambda / 10) / (3.0 * order * (order - 1)) - 1.0) <
              std::abs(bounds.min / lambda / (3.0 * order * (order - 1)) - 1.0));
    }
}

TEST_CASE("four-dimensional constants enter through absolute values")
{
    const ShellLoopValues loop{1.50415, -3.0491};
    const double lambda = 0.02;
    const auto four = renorm_bound_constants(lambda, Mode::four_dim, loop);
    const auto zero = renorm_bound_constants(lambda, Mode::zero_dim);
    for (int order = 5; order <= 15; order += 2) {
        const auto with_loops = delta_bounds(order, lambda, four, default_d0(lambda));
        const auto without = delta_bounds(order, lambda, zero, default_d0(lambda));
        CHECK(with_loops.max < without.max);
        CHECK(with_loops.min < without.min);
        CHECK(with_loops.min < with_loops.max);
    }
}

TEST_CASE("invalid inputs are rejected")
{
    const auto constants = renorm_bound_constants(0.01, Mode::zero_dim);
    CHECK_THROWS_AS(delta_bounds(4, 0.01, constants, 0.1), config_error);
    CHECK_THROWS_AS(delta_bounds(5, -0.01, constants, 0.1), config_error);
    CHECK_THROWS_AS(renorm_bound_constants(std::nan(""), Mode::zero_dim), config_error);
}
