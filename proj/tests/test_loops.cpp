#include <catch_amalgamated.hpp>

#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "oracles.hpp"
#include "phi4/loops.hpp"

using namespace phi4;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const QuadratureConfig cfg{};

double slope_of_logs(const std::vector<double>& xs, const std::vector<double>& ys)
{
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

} // namespace

TEST_CASE("angular average closed form")
{
    CHECK(angular_average_propagator(3.7, 0.0) == 1.0 / 4.7);
    CHECK_THAT(angular_average_propagator(1.0, 1.0), WithinRel(2.0 / (3.0 + std::sqrt(5.0)), 1e-15));
    CHECK_THAT(angular_average_propagator(1.0, 1.0), WithinRel(0.381966, 1e-6));
    for (double k2 : {0.0, 0.3, 2.0, 1e4})
        for (double q2 : {0.1, 5.0, 1e6})
            CHECK_THAT(angular_average_propagator(k2, q2), WithinRel(angular_average_propagator(q2, k2), 1e-14));
    const auto mc = oracle::angular_average(1.0, 1.0, 10000000, 7);
    CHECK(std::abs(mc.mean / angular_average_propagator(1.0, 1.0) - 1.0) < 1e-3);
}

TEST_CASE("angular average difference and continuation below zero")
{
    using wide = boost::multiprecision::cpp_bin_float_50;
    auto average = [](wide k2, wide q2) {
        const wide a = k2 + q2 + 1;
        return wide(2) / (a + sqrt(a * a - 4 * k2 * q2));
    };
    for (double k2 : {1e-8, 0.5, 3.0, 1e5, 1e10}) {
        for (double q2 : {-1.0, -0.5, 0.0, 2.0, 1e3}) {
            const double direct = static_cast<double>(average(k2, q2) - average(k2, -1));
            CAPTURE(k2, q2);
            if (q2 == -1.0)
                CHECK(angular_average_difference(k2, q2, -1.0) == 0.0);
            else
                CHECK_THAT(angular_average_difference(k2, q2, -1.0), WithinRel(direct, 1e-12));
        }
    }
    CHECK(std::isfinite(angular_average_propagator(1e-12, -1.0)));
}

TEST_CASE("one-loop bubble closed form")
{
    CHECK_THAT(bubble_shape(-1.0), WithinRel(-2.0 + M_PI / std::sqrt(3.0), 1e-14));
    CHECK_THAT(bubble_shape(1.0), WithinRel(-2.0 + std::sqrt(5.0) * std::log((std::sqrt(5.0) + 1) / (std::sqrt(5.0) - 1)), 1e-14));
    CHECK_THAT(bubble_shape(1e-4 * 0.999), WithinRel(bubble_shape(1e-4 * 1.001), 3e-3));
    CHECK_THROWS_AS(bubble_shape(-4.0), config_error);
    const auto mc = oracle::subtracted_bubble(1.0, 2000000, 12);
    CHECK(std::abs(mc.mean / renormalized_bubble(1.0) - 1.0) < 5e-3);
}

TEST_CASE("sunset remainder matches extended-precision direct evaluation")
{
    using wide = boost::multiprecision::cpp_bin_float_50;
    for (double x : {1e-6, 0.01, 1.0, 30.0, 1e3, 1e8}) {
        for (double z : {-1.0, -0.3, 0.7, 5.0, 1e2}) {
            const wide a = wide(x) + z + 1;
            const wide d = 1 / (wide(x) + 1);
            const wide direct = 2 / (a + sqrt(a * a - 4 * wide(x) * z)) - d + z * d * d * d;
            CAPTURE(x, z);
            CHECK_THAT(sunset_remainder(x, z), WithinRel(static_cast<double>(direct), 1e-12));
        }
    }
}

TEST_CASE("complex-step derivative of the remainder agrees with finite differences")
{
    for (double x : {0.2, 4.0, 1e3}) {
        for (double z : {-1.0, 0.5, 20.0}) {
            const double h = 1e-5;
            const double fd = (-3.0 * sunset_remainder(x, z) + 4.0 * sunset_remainder(x, z + h) -
                               sunset_remainder(x, z + 2 * h)) /
                              (2 * h);
            const double cs = std::imag(sunset_remainder(x, std::complex<double>(z, 1e-20))) / 1e-20;
            CAPTURE(x, z);
            CHECK_THAT(cs, WithinRel(fd, 1e-5));
        }
    }
}

TEST_CASE("Monte Carlo agreement on three reference integrals")
{
    CHECK_THAT(n2_tilde(0.0, 0.0, cfg, LoopWeight::unit, Scheme::none).value, WithinRel(M_PI * M_PI / 2.0, 1e-10));
    for (const auto& comparison : oracle::reference_comparisons(cfg)) {
        CAPTURE(comparison.name, comparison.quadrature, comparison.monte_carlo.mean);
        CHECK(comparison.relative_difference() < 5e-3);
        CHECK(std::abs(comparison.monte_carlo.mean - comparison.quadrature) < 5.0 * comparison.monte_carlo.standard_error);
    }
}

TEST_CASE("frozen shell values of the plain kernel")
{
    CHECK_THAT(sunset_kernel(-1.0, SunsetVariant::plain, cfg).value, WithinRel(1.5041478232881245, 1e-9));
    CHECK_THAT(sunset_kernel_derivative(-1.0, SunsetVariant::plain, cfg).value, WithinRel(-3.0491395873522005, 1e-8));
    CHECK(sunset_kernel(0.0, SunsetVariant::plain, cfg).value == 0.0);
}

TEST_CASE("weighted inner bubble against an independent nested quadrature")
{
    const auto table = weighted_bubble_table(cfg);
    CHECK_THAT((*table)(1.0), WithinRel(-104.9799296310653, 1e-7));
    CHECK_THAT((*table)(0.37), WithinRel(-40.331330548274636, 1e-7));
    CHECK_THAT(weighted_bubble_direct(0.37, cfg).value, WithinRel(-40.331330548274636, 1e-7));
    CHECK((*table)(0.0) == 0.0);
}

TEST_CASE("weighted bubble against an independent multiprecision quadrature")
{
    CHECK_THAT(n2_tilde(1e2, 0.02, cfg).value, WithinRel(-345.822506114640278, 1e-9));
    CHECK_THAT(n2_tilde(1e4, 0.02, cfg).value, WithinRel(-1374.56152931374382, 1e-9));
    CHECK_THAT(n2_tilde(1e6, 0.02, cfg).value, WithinRel(-3726.09248190387104, 1e-9));
}

TEST_CASE("on-shell subtraction vanishes at the mass shell")
{
    for (auto variant : {SunsetVariant::plain, SunsetVariant::weighted}) {
        CHECK(n3_tilde(-1.0, 0.02, cfg, variant).value == 0.0);
        const double slope = shell_values(variant, 0.02, cfg).derivative;
        CHECK(std::abs(n3_derivative(-1.0, 0.02, cfg, variant).value) < 1e-4 * std::abs(slope));
    }
    CHECK(n2_tilde(-1.0, 0.02, cfg).value == 0.0);
    CHECK(n2_tilde(0.0, 0.02, cfg, LoopWeight::m1, Scheme::zero_momentum).value == 0.0);
}

TEST_CASE("finite-difference derivative matches the subtraction coefficient")
{
    const double coefficient = sunset_kernel_derivative(-1.0, SunsetVariant::plain, cfg).value;
    const double fd = n3_derivative(-1.0, 0.0, cfg, SunsetVariant::plain, Scheme::zero_momentum).value;
    CHECK_THAT(fd, WithinRel(coefficient, 1e-4));
    const double inside = sunset_kernel_derivative(2.0, SunsetVariant::plain, cfg).value;
    CHECK_THAT(n3_derivative(2.0, 0.0, cfg, SunsetVariant::plain, Scheme::zero_momentum).value, WithinRel(inside, 1e-4));
}

TEST_CASE("renormalized integrals are stable under cutoff doubling")
{
    QuadratureConfig doubled = cfg;
    doubled.radial_cutoff *= 2.0;
    for (double q2 : {0.5, 1e2, 1e5}) {
        for (auto variant : {SunsetVariant::plain, SunsetVariant::weighted}) {
            const double base = n3_tilde(q2, 0.02, cfg, variant).value;
            const double wide = n3_tilde(q2, 0.02, doubled, variant).value;
            CAPTURE(q2, base, wide);
            CHECK(std::abs(wide - base) <= cfg.rel_tol * std::abs(base) * 10.0);
        }
        const double base = n2_tilde(q2, 0.02, cfg).value;
        const double wide = n2_tilde(q2, 0.02, doubled).value;
        CHECK(std::abs(wide - base) <= cfg.rel_tol * std::abs(base) * 10.0);
    }
}

TEST_CASE("Taylor degrees of the hard-coded graphs")
{
    CHECK(sunset_degree(SunsetVariant::plain) == 2);
    CHECK(sunset_degree(SunsetVariant::weighted) == 2);
    CHECK(bubble_degree(LoopWeight::unit) == -2);
    CHECK(bubble_degree(LoopWeight::m1) == 0);
    CHECK(n3_tilde(3.0, 0.02, cfg).subtraction_degree == 2);
    CHECK(n2_tilde(3.0, 0.02, cfg, LoopWeight::unit, Scheme::none).subtraction_degree == -1);
    CHECK_THROWS_AS(taylor_degree(2, 2, 0.0), numerical_error);
}

TEST_CASE("schemes that leave divergences are rejected")
{
    CHECK_THROWS_AS(n3_tilde(1.0, 0.02, cfg, SunsetVariant::plain, Scheme::none), config_error);
    CHECK_THROWS_AS(n2_tilde(1.0, 0.02, cfg, LoopWeight::m1, Scheme::none), config_error);
    CHECK_THROWS_AS(parse_scheme("bphz"), config_error);
    CHECK_THROWS_AS(parse_variant("dressed"), config_error);
    CHECK_THROWS_AS(sunset_kernel(-1.5, SunsetVariant::plain, cfg), config_error);
    QuadratureConfig bad = cfg;
    bad.radial_cutoff = 10.0;
    CHECK_THROWS_AS(validate(bad), config_error);
}

TEST_CASE("two-loop integrand is symmetric under exchange of the loop momenta")
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec4 k1{gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
        const Vec4 k2{gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
        const Vec4 q{gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
        for (auto variant : {SunsetVariant::plain, SunsetVariant::weighted})
            CHECK(two_loop_integrand(k1, k2, q, variant) == two_loop_integrand(k2, k1, q, variant));
    }
}

TEST_CASE("shell derivative is negative for both variants")
{
    for (double lambda : {0.02, 0.05}) {
        for (auto variant : {SunsetVariant::plain, SunsetVariant::weighted}) {
            const auto loop = shell_values(variant, lambda, cfg);
            const auto constants = renorm_bound_constants(lambda, Mode::four_dim, loop);
            CHECK(loop.value > 0.0);
            CHECK(constants.rho0 < 0.0);
        }
    }
}

TEST_CASE("subtracted integrals grow at large momentum")
{
    std::vector<double> log_logs, n2_logs, n3_logs;
    for (double q2 : {1e2, 1e3, 1e4, 1e5, 1e6}) {
        log_logs.push_back(std::log(std::log(q2 + 1.0)));
        n2_logs.push_back(std::log(std::abs(n2_tilde(q2, 0.02, cfg).value)));
        n3_logs.push_back(std::log(std::abs(n3_tilde(q2, 0.02, cfg, SunsetVariant::weighted).value / (q2 + 1.0))));
    }
    CHECK(slope_of_logs(log_logs, n2_logs) > 0.0);
    CHECK(slope_of_logs(log_logs, n3_logs) > 0.0);
}
