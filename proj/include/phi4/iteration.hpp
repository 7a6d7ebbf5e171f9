#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "mapping4d.hpp"
#include "norms.hpp"
#include "trees.hpp"

namespace phi4 {

struct IterationOptions {
    int n_max = 7;
    MapOptions map;
    FundamentalOptions fundamental;
    LayoutSpec layout;
    QuadratureConfig quadrature;
};

/** Per-step record of the iteration. */
struct IterationStep {
    int nu = 0;
    double distance = 0.0;       // d_nu = ||H_nu - H_{nu-1}||
    double ball_distance = 0.0;  // b_nu = ||H_nu - H_T0||
    double ratio = std::numeric_limits<double>::quiet_NaN();  // d_nu / d_{nu-1}
    double band = 0.0;           // quadrature uncertainty of d_nu
    double delta3 = 0.0;         // zero-momentum splitting of H_nu
    double gamma = 0.0;          // gamma~ of H_nu
    double splitting_margin = 0.0;
    double h2_lower = 0.0;
    double h2_upper = 0.0;
    bool signs = true;
    bool splitting = true;
    bool renorm = true;
};

struct IterationReport {
    double lambda = 0.0;
    int n_max = 0;
    int nu_reached = 0;
    double tol = 0.0;
    BallRadius radius;
    double r0 = 0.0;
    double fundamental_norm = 0.0;
    std::vector<IterationStep> steps;
    bool converged = false;
    bool left_ball = false;
    bool membership_failed = false;
    std::string stop_reason;

    /** d_nu <= d_{nu-1} + band for every nu >= from. */
    bool distances_decrease(int from = 2) const
    {
        for (std::size_t i = 1; i < steps.size(); ++i)
            if (steps[i].nu >= from && steps[i].distance > steps[i - 1].distance + steps[i].band)
                return false;
        return true;
    }

    bool within_ball() const
    {
        for (const auto& step : steps)
            if (step.ball_distance > r0)
                return false;
        return true;
    }

    bool signs_and_bounds_kept() const
    {
        for (const auto& step : steps)
            if (!step.signs || !step.splitting)
                return false;
        return true;
    }
};

struct IterationResult {
    IterationReport report;
    GreenSequence fundamental;
    GreenSequence last;
    std::shared_ptr<const NormWeights> weights;
};

/** Pessimistic quadrature band on the two-point family from the kernel error estimates. */
inline double quadrature_band(const GreenSequence& h, const NormWeights& w, const RenormConstants& rc, double gamma)
{
    const double denominator = std::abs(gamma + rc.rho);
    if (denominator == 0.0)
        return 0.0;
    const double shell_error = h.channel->value_error(-1.0);
    double band = 0.0;
    for (std::size_t i = 0; i < w.layout->radial.size(); ++i) {
        const double q2 = w.layout->radial[i];
        const double error = h.lambda * std::abs(rc.delta3) * (h.channel->value_error(q2) + shell_error);
        band = std::max(band, 2.0 * error / (denominator * w.m1[i]));
    }
    return band;
}

/** Fundamental sequence, its norm weights and the ball radius on one layout. */
struct IterationSetup {
    GreenSequence fundamental;
    std::shared_ptr<const NormWeights> weights;
    BallRadius radius;
};

inline IterationSetup prepare_iteration(double lambda, const IterationOptions& options)
{
    require(lambda > 0.0 && lambda <= 0.05, "lambda must lie in (0, 0.05]");
    IterationSetup setup;
    setup.fundamental = fundamental_sequence(lambda, options.n_max, options.quadrature, options.fundamental,
                                             options.layout);
    setup.weights = std::make_shared<const NormWeights>(make_norm_weights(
        lambda, setup.fundamental.layout, setup.fundamental.channel, options.fundamental.d0));
    setup.radius = ball_radius_r0(*setup.weights);
    return setup;
}

inline IterationResult phi44_iterate(double lambda, int nu_max, double tol, const IterationOptions& options = {})
{
    require(nu_max >= 1, "nu_max must be positive");
    require(tol > 0.0, "tol must be positive");
    IterationSetup setup = prepare_iteration(lambda, options);
    IterationResult result;
    result.fundamental = setup.fundamental;
    result.weights = setup.weights;
    const NormWeights& w = *setup.weights;
    IterationReport& report = result.report;
    report.lambda = lambda;
    report.n_max = options.n_max;
    report.tol = tol;
    report.radius = setup.radius;
    report.r0 = setup.radius.value();
    report.fundamental_norm = banach_norm(setup.fundamental, w);
    const SplittingBounds bounds = sequence_bounds(setup.fundamental, options.map.d0);

    GreenSequence current = setup.fundamental;
    for (int nu = 1; nu <= nu_max; ++nu) {
        MapStep step;
        try {
            step = apply_mstar_detailed(current, options.map);
        } catch (const numerical_error& failure) {
            report.membership_failed = true;
            report.stop_reason = failure.what();
            break;
        }
        IterationStep record;
        record.nu = nu;
        record.distance = distance(step.next, current, w);
        record.ball_distance = distance(step.next, setup.fundamental, w);
        record.band = quadrature_band(current, w, step.constants, step.gamma_used);
        if (!report.steps.empty() && report.steps.back().distance > 0.0)
            record.ratio = record.distance / report.steps.back().distance;
        const Membership image = check_membership(step.next, bounds);
        record.signs = image.signs;
        record.splitting = image.splitting;
        record.splitting_margin = image.splitting_margin;
        record.h2_lower = image.worst_h2_lower;
        record.h2_upper = image.worst_h2_upper;
        record.renorm = image.renorm.all();
        record.delta3 = zero_momentum_splitting(step.next);
        record.gamma = zero_momentum_gamma(step.next);
        report.steps.push_back(record);
        report.nu_reached = nu;
        current = std::move(step.next);
        if (record.ball_distance > report.r0) {
            report.left_ball = true;
            report.stop_reason = "left the ball: b_" + std::to_string(nu) + " = " + format_number(record.ball_distance) +
                                 " > r(0) = " + format_number(report.r0);
            break;
        }
        if (record.distance + record.band < tol) {
            report.converged = true;
            report.stop_reason = "converged";
            break;
        }
    }
    if (report.stop_reason.empty())
        report.stop_reason = "nu_max reached";
    result.last = std::move(current);
    return result;
}

/** ||M*(h) - h|| in the norm of `w`. */
inline double fixed_point_residual(const GreenSequence& h, const NormWeights& w, const MapOptions& options = {})
{
    return distance(apply_mstar(h, options), h, w);
}

} // namespace phi4
