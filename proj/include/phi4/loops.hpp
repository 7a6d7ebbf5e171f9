#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "splitting.hpp"

namespace phi4 {

struct QuadratureConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    double radial_cutoff = 1e12;  // in units of m^2, scaled by max(1, |q^2| + m^2)
    int max_subdivisions = 10;    // maximal bisection depth per segment
};

inline void validate(const QuadratureConfig& cfg)
{
    require(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0, "quadrature tolerances must be positive");
    require(cfg.radial_cutoff >= 1e3, "radial_cutoff must be at least 1e3");
    require(cfg.max_subdivisions >= 1, "max_subdivisions must be positive");
}

struct LoopResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int subtraction_degree = -1;  // Taylor degree d(G) of the subtraction, -1 when nothing is subtracted
    long evaluations = 0;
};

enum class Scheme { none, zero_momentum, on_shell };
enum class LoopWeight { unit, m1 };
enum class SunsetVariant { plain, weighted };

inline Scheme parse_scheme(const std::string& text)
{
    if (text == "none")
        return Scheme::none;
    if (text == "zero_momentum")
        return Scheme::zero_momentum;
    if (text == "on_shell")
        return Scheme::on_shell;
    throw config_error("scheme must be none, zero_momentum or on_shell, got '" + text + "'");
}

inline SunsetVariant parse_variant(const std::string& text)
{
    if (text == "plain")
        return SunsetVariant::plain;
    if (text == "weighted")
        return SunsetVariant::weighted;
    throw config_error("sunset variant must be plain or weighted, got '" + text + "'");
}

inline LoopWeight parse_weight(const std::string& text)
{
    if (text == "unit")
        return LoopWeight::unit;
    if (text == "m1")
        return LoopWeight::m1;
    throw config_error("loop weight must be unit or m1, got '" + text + "'");
}

/** Power of (q^2 + m^2) in the M_1 envelope beyond the free propagator. */
inline double m1_exponent()
{
    return M_PI * M_PI / 54.0;
}

/** Taylor degree d(G) = 4L - 2|lines| + sum of vertex exponents; positive degrees above 2 are inconsistent. */
inline int taylor_degree(int loops, int internal_lines, double vertex_exponent_sum)
{
    const int degree = static_cast<int>(std::floor(4.0 * loops - 2.0 * internal_lines + vertex_exponent_sum + 1e-12));
    if (degree > 2)
        throw numerical_error("taylor_degree: d(G) = " + std::to_string(degree) + " exceeds 2");
    return degree;
}

inline int sunset_degree(SunsetVariant variant)
{
    if (variant == SunsetVariant::plain)
        return taylor_degree(2, 3, 0.0);
    return taylor_degree(2, 5, 4.0 * (1.0 + m1_exponent()));
}

inline int bubble_degree(LoopWeight weight)
{
    if (weight == LoopWeight::unit)
        return taylor_degree(1, 3, 0.0);
    return taylor_degree(1, 3, 2.0 * (1.0 + m1_exponent()));
}

/** a^2 - 4 k2 q2 with a = k2 + q2 + m2, written as a sum of non-negative terms on either sign of q2. */
template <class T>
T discriminant(double k2, T q2, double m2 = 1.0)
{
    using std::real;
    if (real(q2) < 0.0) {
        const T a = k2 + q2 + m2;
        return a * a - 4.0 * k2 * q2;
    }
    return (k2 - q2) * (k2 - q2) + 2.0 * m2 * (k2 + q2) + m2 * m2;
}

/** Average of 1/((k+q)^2 + m^2) over the 3-sphere of directions of k; analytic in q2 for q2 > -(sqrt(k2)+m)^2. */
template <class T>
T angular_average_propagator(double k2, T q2, double m2 = 1.0)
{
    using std::sqrt;
    const T a = k2 + q2 + m2;
    return 2.0 / (a + sqrt(discriminant(k2, q2, m2)));
}

/** Difference of angular averages at two external invariants without cancellation at large k2 (m = 1). */
inline double angular_average_difference(double k2, double q2, double reference_q2)
{
    const double a = k2 + q2 + 1.0;
    const double a_ref = k2 + reference_q2 + 1.0;
    const double s = std::sqrt(discriminant(k2, q2));
    const double s_ref = std::sqrt(discriminant(k2, reference_q2));
    const double shift = reference_q2 - q2;
    const double c = k2 - q2 + 1.0;
    const double c_ref = k2 - reference_q2 + 1.0;
    double numerator = 0.0;
    if (c > 0.0 && c_ref > 0.0) {
        // s = c + 4 q2 / (s + c), so the leading k2 terms cancel analytically
        numerator = shift * 4.0 * (1.0 + q2 / (s + c) + reference_q2 / (s_ref + c_ref)) / (s + s_ref);
    } else {
        numerator = shift * (1.0 + (reference_q2 + q2 - 2.0 * k2 + 2.0) / (s + s_ref));
    }
    return 2.0 * numerator / ((a + s) * (a_ref + s_ref));
}

/** Shape of the once-subtracted one-loop bubble: -2 + beta ln((beta+1)/(beta-1)), beta = sqrt(1 + 4/t). */
inline double bubble_shape(double t)
{
    require(t > -4.0, "bubble_shape: argument must exceed -4 (two-particle threshold)");
    if (std::abs(t) < 1e-4)
        return t / 6.0 - t * t / 60.0 + t * t * t / 420.0;
    if (t < 0.0) {
        const double root = std::sqrt(-4.0 / t - 1.0);
        return -2.0 + 2.0 * root * std::atan(1.0 / root);
    }
    const double beta = std::sqrt(1.0 + 4.0 / t);
    const double beta_minus_one = (4.0 / t) / (beta + 1.0);
    return -2.0 + beta * std::log((beta + 1.0) / beta_minus_one);
}

/** One-loop bubble with two unit propagators, subtracted at zero momentum: integral d^4k [D(k)D(k+p) - D(k)^2]. */
inline double renormalized_bubble(double p2)
{
    return -M_PI * M_PI * bubble_shape(p2);
}

/**
 * Remainder of the angular-averaged outer propagator after subtracting value and first z-derivative at z = 0:
 * <D(P+q)> - D(P) + z D(P)^3 with z = q^2, in a cancellation-free closed form.
 */
template <class T>
T sunset_remainder(double p2, T z)
{
    using std::real;
    using std::sqrt;
    const double u = p2 + 1.0;
    const T a = u + z;
    const T b = u - z;
    const T s = sqrt(discriminant(p2, z));
    if (real(b) >= 0.0)
        return 4.0 * z * z * (s + a - 2.0 * u * p2) / (u * u * u * (b + s) * (a + s) * (a + s));
    return (b - s) / ((a + s) * u) + z / (u * u * u);
}

/** Ratio M_1 D_F^2 / gamma_max of the norm envelope. */
inline double unit_m1_weight(double k2)
{
    const double shifted = k2 + 1.0;
    return (1.0 + 6.0 * std::pow(shifted, m1_exponent())) / shifted;
}

using Vec4 = std::array<double, 4>;

inline double square(const Vec4& v)
{
    return v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
}

/** Unsubtracted two-loop integrand at loop momenta k1, k2 and external q (gamma_max = 1 for the weighted one). */
inline double two_loop_integrand(const Vec4& k1, const Vec4& k2, const Vec4& q, SunsetVariant variant)
{
    Vec4 total{};
    for (std::size_t i = 0; i < 4; ++i)
        total[i] = k1[i] + k2[i] + q[i];
    const double outer = 1.0 / (square(total) + 1.0);
    if (variant == SunsetVariant::plain)
        return outer / ((square(k1) + 1.0) * (square(k2) + 1.0));
    return unit_m1_weight(square(k1)) * unit_m1_weight(square(k2)) * outer;
}

/** Fitted c x^{-p} (ln x)^s continuation of a radial density beyond the cutoff. */
struct TailEstimate {
    double value = 0.0;
    double error = 0.0;
    double power = 0.0;
    double log_power = 0.0;
};

namespace detail {

struct TailModel {
    double log_coefficient = 0.0;
    double power = 0.0;
    double log_power = 0.0;
    double sign = 0.0;
};

inline TailModel fit_tail_model(const std::function<double(double)>& density, double top)
{
    std::array<double, 3> xs{top / 10.0, top / std::sqrt(10.0), top};
    std::array<double, 3> values{};
    for (std::size_t i = 0; i < 3; ++i)
        values[i] = density(xs[i]);
    TailModel model;
    if (values[0] == 0.0 && values[1] == 0.0 && values[2] == 0.0)
        return model;
    const double sign = values[2] > 0.0 ? 1.0 : -1.0;
    for (double value : values)
        if (!(value * sign > 0.0))
            throw numerical_error("tail extrapolation: radial density changes sign or vanishes near the cutoff");
    // ln|h| = ln c - p ln x + s ln ln x, solved by Cramer's rule
    std::array<std::array<double, 3>, 3> rows{};
    std::array<double, 3> rhs{};
    for (std::size_t i = 0; i < 3; ++i) {
        rows[i] = {1.0, -std::log(xs[i]), std::log(std::log(xs[i]))};
        rhs[i] = std::log(std::abs(values[i]));
    }
    auto det = [](const std::array<std::array<double, 3>, 3>& m) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double base = det(rows);
    std::array<double, 3> solution{};
    for (std::size_t column = 0; column < 3; ++column) {
        auto replaced = rows;
        for (std::size_t i = 0; i < 3; ++i)
            replaced[i][column] = rhs[i];
        solution[column] = det(replaced) / base;
    }
    model.log_coefficient = solution[0];
    model.power = solution[1];
    model.log_power = solution[2];
    model.sign = sign;
    return model;
}

inline double integrate_tail_model(const TailModel& model, double cutoff)
{
    if (model.sign == 0.0)
        return 0.0;
    if (!(model.power > 1.0 + 1e-6))
        throw numerical_error("tail extrapolation: radial density decays too slowly (fitted power " +
                              std::to_string(model.power) + ")");
    const double log_cutoff = std::log(cutoff);
    const double rate = model.power - 1.0;
    if (model.log_power > -1.0) {
        const double exponent = model.log_power + 1.0;
        const double upper = boost::math::tgamma(exponent, rate * log_cutoff);
        if (upper == 0.0)
            return 0.0;
        return model.sign * std::exp(model.log_coefficient + std::log(upper) - exponent * std::log(rate));
    }
    boost::math::quadrature::exp_sinh<double> integrator;
    auto integrand = [&](double shift) {
        const double y = log_cutoff + shift;
        return std::exp(model.log_coefficient - rate * y + model.log_power * std::log(y));
    };
    return model.sign * integrator.integrate(integrand);
}

} // namespace detail

/** Tail of the integral of `density` over [cutoff, inf), with the spread of two fitting windows as error. */
inline TailEstimate power_log_tail(const std::function<double(double)>& density, double cutoff)
{
    require(cutoff >= 1e3, "power_log_tail: cutoff must be at least 1e3");
    const auto model = detail::fit_tail_model(density, cutoff);
    TailEstimate tail;
    tail.value = detail::integrate_tail_model(model, cutoff);
    tail.power = model.power;
    tail.log_power = model.log_power;
    if (model.sign != 0.0) {
        const auto shifted = detail::fit_tail_model(density, cutoff / std::sqrt(10.0));
        double alternative = tail.value;
        try {
            alternative = detail::integrate_tail_model(shifted, cutoff);
        } catch (const numerical_error&) {
            alternative = 0.0;
        }
        tail.error = std::abs(alternative - tail.value);
    }
    return tail;
}

/**
 * pi^2 * integral over x = k^2 in [0, inf) of x * integrand(x), the 4-d measure of an angle-averaged integrand.
 * Integrated in ln x up to radial_cutoff * max(1, scale); the rest comes from a fitted power-log tail.
 */
inline LoopResult radial_integral(const std::function<double(double)>& integrand, double scale,
                                  const QuadratureConfig& cfg, const std::vector<double>& breaks = {})
{
    validate(cfg);
    LoopResult result;
    long evaluations = 0;
    auto density = [&](double x) {
        ++evaluations;
        return M_PI * M_PI * x * integrand(x);
    };
    const double cutoff = cfg.radial_cutoff * std::max(1.0, scale);
    const double log_low = std::log(1e-20);
    const double log_high = std::log(cutoff);
    std::vector<double> points{log_low, 0.0, log_high};
    for (double v = log_low; v < log_high; v += std::log(100.0))
        points.push_back(v);
    for (double x : breaks)
        if (x > 0.0 && std::isfinite(x))
            points.push_back(std::log(x));
    std::sort(points.begin(), points.end());
    points.erase(std::remove_if(points.begin(), points.end(),
                                [&](double v) { return v < log_low || v > log_high; }),
                 points.end());
    points.erase(std::unique(points.begin(), points.end(), [](double a, double b) { return std::abs(a - b) < 1e-4; }),
                 points.end());

    auto in_log = [&](double v) {
        const double x = std::exp(v);
        return density(x) * x;
    };
    double total = 0.0;
    double error = 0.0;
    double absolute = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        double segment_error = 0.0;
        double segment_l1 = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            in_log, points[i], points[i + 1], static_cast<unsigned>(cfg.max_subdivisions), cfg.rel_tol,
            &segment_error, &segment_l1);
        error += segment_error;
        absolute += segment_l1;
    }
    const TailEstimate tail = power_log_tail(density, cutoff);
    result.value = total + tail.value;
    result.error_estimate = error + tail.error;
    result.evaluations = evaluations;
    if (!std::isfinite(result.value))
        throw numerical_error("radial_integral: non-finite result");
    if (result.error_estimate > cfg.rel_tol * std::max(std::abs(result.value), 1e-3 * absolute) + cfg.abs_tol)
        throw numerical_error("radial_integral: no convergence (error " + format_number(result.error_estimate) +
                              " for value " + format_number(result.value) + ")");
    return result;
}

/** Breakpoints where loop integrands in k^2 change behaviour for external invariant z. */
inline std::vector<double> kernel_breaks(double z)
{
    std::vector<double> breaks;
    if (std::abs(z) > 1e-12)
        breaks.push_back(std::abs(z));
    if (std::abs(z + 1.0) > 1e-12)
        breaks.push_back(std::abs(z + 1.0));
    if (z > 1.0) {
        // the angular average turns over across |k^2 - q^2| ~ 2 sqrt(q^2 + m^2)
        const double width = 2.0 * std::sqrt(z + 1.0);
        for (double multiple : {0.25, 1.0, 4.0, 16.0, 64.0}) {
            breaks.push_back(z + multiple * width);
            if (z - multiple * width > 0.0)
                breaks.push_back(z - multiple * width);
        }
    }
    return breaks;
}

/** unit_m1_weight(target) - unit_m1_weight(k2) where step = target - k2, each supplied without cancellation. */
inline double unit_m1_weight_change(double k2, double target, double step)
{
    const double base = k2 + 1.0;
    const double moved = target + 1.0;
    const double inverse_change = -step / (moved * base);
    const double power = m1_exponent() - 1.0;
    const double log_ratio = std::abs(step) < 0.5 * base ? std::log1p(step / base) : std::log(moved / base);
    const double power_change = std::pow(base, power) * std::expm1(power * log_ratio);
    return inverse_change + 6.0 * power_change;
}

/**
 * Average over the directions of k of unit_m1_weight(|k - P|^2) - unit_m1_weight(|k|^2), folded onto
 * [0, pi/2] so the terms odd in cos(theta) cancel before integration.
 */
inline double sphere_average_m1_change(double k2, double p2, double tol)
{
    const double cross = 2.0 * std::sqrt(k2 * p2);
    const double gap = std::sqrt(k2) - std::sqrt(p2);
    auto integrand = [&](double theta) {
        const double shift = cross * std::cos(theta);
        const double sine = std::sin(theta);
        const double half = std::sin(theta / 2.0);
        const double near = gap * gap + 2.0 * cross * half * half;
        const double far_step = p2 + shift;
        return sine * sine *
               (unit_m1_weight_change(k2, k2 + far_step, far_step) + unit_m1_weight_change(k2, near, p2 - shift));
    };
    // |k - P|^2 reaches (|k| - |P|)^2 at theta = 0 and varies on the mass scale within this angle
    const double width = cross > 0.0 ? std::sqrt(2.0 * (1.0 + gap * gap) / cross) : M_PI;
    std::vector<double> edges{0.0};
    for (double edge = width; edge < M_PI / 2.0; edge *= 4.0)
        edges.push_back(edge);
    edges.push_back(M_PI / 2.0);
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        integral += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, edges[i], edges[i + 1], 8, tol);
    return 2.0 / M_PI * integral;
}

/** Inner subtracted bubble of the weighted two-loop integral at gamma_max = 1. */
inline LoopResult weighted_bubble_direct(double p2, const QuadratureConfig& cfg)
{
    require(p2 >= 0.0, "weighted_bubble_direct: P^2 must be non-negative");
    if (p2 == 0.0)
        return {0.0, 0.0, 0, 0};
    auto integrand = [&](double x) { return unit_m1_weight(x) * sphere_average_m1_change(x, p2, 1e-2 * cfg.rel_tol); };
    LoopResult result = radial_integral(integrand, p2, cfg, kernel_breaks(p2));
    result.subtraction_degree = taylor_degree(1, 4, 4.0 * (1.0 + m1_exponent()));
    return result;
}

/** Grid in ln P^2 for the tabulated weighted bubble. */
struct BubbleTableSpec {
    double log_low = -16.0;
    double log_high = 44.0;
    int points = 241;
};

/** Tolerance floor for tabulating the weighted bubble; the angular and radial quadratures both sit below it. */
inline double table_rel_tol()
{
    return 1e-8;
}

/** Cubic B-spline of ln|W/P^2| over ln P^2 for the weighted inner bubble W at gamma_max = 1. */
class WeightedBubbleTable {
public:
    WeightedBubbleTable(const QuadratureConfig& cfg, const BubbleTableSpec& spec = {})
        : spec_(spec)
    {
        require(spec.points >= 8 && spec.log_high > spec.log_low, "bubble table needs at least 8 points");
        step_ = (spec.log_high - spec.log_low) / (spec.points - 1);
        std::vector<double> values(static_cast<std::size_t>(spec.points));
        QuadratureConfig inner = cfg;
        inner.rel_tol = std::max(cfg.rel_tol, table_rel_tol());
        parallel_for(values.size(), [&](std::size_t i) {
            const double p2 = std::exp(spec.log_low + step_ * static_cast<double>(i));
            values[i] = weighted_bubble_direct(p2, inner).value / p2;
        });
        sign_ = values.front() < 0.0 ? -1.0 : 1.0;
        std::vector<double> logs(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] * sign_ > 0.0))
                throw numerical_error("weighted bubble changes sign on the table grid");
            logs[i] = std::log(values[i] * sign_);
        }
        high_slope_ = (logs[logs.size() - 1] - logs[logs.size() - 2]) / step_;
        low_value_ = logs.front();
        high_value_ = logs.back();
        spline_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
            logs.begin(), logs.end(), spec.log_low, step_);
    }

    double operator()(double p2) const
    {
        if (p2 <= 0.0)
            return 0.0;
        const double ell = std::log(p2);
        double log_ratio = 0.0;
        if (ell < spec_.log_low)
            log_ratio = low_value_;
        else if (ell > spec_.log_high)
            log_ratio = high_value_ + high_slope_ * (ell - spec_.log_high);
        else
            log_ratio = (*spline_)(ell);
        return sign_ * p2 * std::exp(log_ratio);
    }

    const BubbleTableSpec& spec() const { return spec_; }

private:
    BubbleTableSpec spec_;
    double step_ = 0.0;
    double sign_ = 1.0;
    double high_slope_ = 0.0;
    double low_value_ = 0.0;
    double high_value_ = 0.0;
    std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

/** Process-wide table per quadrature configuration, built once under a lock. */
inline std::shared_ptr<const WeightedBubbleTable> weighted_bubble_table(const QuadratureConfig& cfg)
{
    static std::mutex guard;
    static std::map<std::tuple<double, double, double, int>, std::shared_ptr<const WeightedBubbleTable>> cache;
    const auto key = std::make_tuple(cfg.rel_tol, cfg.abs_tol, cfg.radial_cutoff, cfg.max_subdivisions);
    std::lock_guard<std::mutex> lock(guard);
    auto it = cache.find(key);
    if (it != cache.end())
        return it->second;
    auto table = std::make_shared<const WeightedBubbleTable>(cfg);
    cache.emplace(key, table);
    return table;
}

/** Inner bubble of the selected two-loop variant as a function of P^2 (gamma_max = 1 for the weighted one). */
inline std::function<double(double)> inner_bubble(SunsetVariant variant, const QuadratureConfig& cfg)
{
    if (variant == SunsetVariant::plain)
        return renormalized_bubble;
    auto table = weighted_bubble_table(cfg);
    return [table](double p2) { return (*table)(p2); };
}

/** Two-loop kernel subtracted at zero momentum to first order in z = q^2 (unit gamma_max). */
inline LoopResult sunset_kernel(double z, SunsetVariant variant, const QuadratureConfig& cfg)
{
    require(z >= -1.0 && std::isfinite(z), "sunset_kernel: q^2 must be >= -m^2");
    const int degree = sunset_degree(variant);
    if (z == 0.0)
        return {0.0, 0.0, degree, 0};
    const auto bubble = inner_bubble(variant, cfg);
    auto integrand = [&](double x) { return bubble(x) * sunset_remainder(x, z); };
    LoopResult result = radial_integral(integrand, std::abs(z) + 1.0, cfg, kernel_breaks(z));
    result.subtraction_degree = degree;
    return result;
}

/** z-derivative of the zero-momentum kernel by complex-step differentiation of the remainder. */
inline LoopResult sunset_kernel_derivative(double z, SunsetVariant variant, const QuadratureConfig& cfg)
{
    require(z >= -1.0 && std::isfinite(z), "sunset_kernel_derivative: q^2 must be >= -m^2");
    const int degree = sunset_degree(variant);
    if (z == 0.0)
        return {0.0, 0.0, degree, 0};
    const auto bubble = inner_bubble(variant, cfg);
    const double step = 1e-20;
    auto integrand = [&](double x) {
        return bubble(x) * std::imag(sunset_remainder(x, std::complex<double>(z, step))) / step;
    };
    LoopResult result = radial_integral(integrand, std::abs(z) + 1.0, cfg, kernel_breaks(z));
    result.subtraction_degree = degree;
    return result;
}

inline double variant_scale(SunsetVariant variant, double lambda)
{
    if (variant == SunsetVariant::plain)
        return 1.0;
    const double gmax = gamma_max(lambda);
    return gmax * gmax;
}

/** Zero-momentum kernel value and derivative at the mass shell q^2 = -m^2. */
inline ShellLoopValues shell_values(SunsetVariant variant, double lambda, const QuadratureConfig& cfg)
{
    const double scale = variant_scale(variant, lambda);
    return {scale * sunset_kernel(-1.0, variant, cfg).value,
            scale * sunset_kernel_derivative(-1.0, variant, cfg).value};
}

/** Renormalized two-loop reference integral at q^2 under the chosen subtraction scheme. */
inline LoopResult n3_tilde(double q2, double lambda, const QuadratureConfig& cfg,
                           SunsetVariant variant = SunsetVariant::plain, Scheme scheme = Scheme::on_shell)
{
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    if (scheme == Scheme::none)
        throw config_error("n3_tilde: the two-loop integral has d(G) = 2 and needs a subtraction scheme");
    const double scale = variant_scale(variant, lambda);
    LoopResult result = sunset_kernel(q2, variant, cfg);
    if (scheme == Scheme::on_shell) {
        const LoopResult shell = sunset_kernel(-1.0, variant, cfg);
        const LoopResult slope = sunset_kernel_derivative(-1.0, variant, cfg);
        const double shift = q2 + 1.0;
        result.value -= shell.value + slope.value * shift;
        result.error_estimate += shell.error_estimate + slope.error_estimate * shift;
        result.evaluations += shell.evaluations + slope.evaluations;
    }
    result.value *= scale;
    result.error_estimate *= scale;
    return result;
}

/** q^2-derivative of n3_tilde by finite differences with one Richardson step; one-sided next to the shell. */
inline LoopResult n3_derivative(double q2, double lambda, const QuadratureConfig& cfg,
                                SunsetVariant variant = SunsetVariant::plain, Scheme scheme = Scheme::on_shell)
{
    const double step = std::max(1e-3 * (q2 + 1.0), 1e-6);
    LoopResult total;
    auto at = [&](double point) {
        const LoopResult value = n3_tilde(point, lambda, cfg, variant, scheme);
        total.evaluations += value.evaluations;
        total.error_estimate = std::max(total.error_estimate, value.error_estimate);
        total.subtraction_degree = value.subtraction_degree;
        return value.value;
    };
    double coarse = 0.0;
    double fine = 0.0;
    if (q2 - step >= -1.0) {
        coarse = (at(q2 + step) - at(q2 - step)) / (2.0 * step);
        fine = (at(q2 + step / 2) - at(q2 - step / 2)) / step;
    } else {
        const double centre = at(q2);
        coarse = (-3.0 * centre + 4.0 * at(q2 + step) - at(q2 + 2.0 * step)) / (2.0 * step);
        fine = (-3.0 * centre + 4.0 * at(q2 + step / 2) - at(q2 + step)) / step;
    }
    const double value_error = total.error_estimate;
    total.value = (4.0 * fine - coarse) / 3.0;
    total.error_estimate = std::abs(fine - coarse) / 3.0 + 6.0 * value_error / step;
    return total;
}

/** One-loop reference integral of weight(k) D_F(k)^2 <D_F(k+q)> under the chosen subtraction scheme. */
inline LoopResult n2_tilde(double q2, double lambda, const QuadratureConfig& cfg, LoopWeight weight = LoopWeight::m1,
                           Scheme scheme = Scheme::on_shell)
{
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and non-negative");
    require(q2 >= -1.0 && std::isfinite(q2), "n2_tilde: q^2 must be >= -m^2");
    const int degree = bubble_degree(weight);
    if (scheme == Scheme::none && degree >= 0)
        throw config_error("n2_tilde: the M1-weighted bubble has d(G) = 0 and needs a subtraction scheme");
    const double prefactor = weight == LoopWeight::m1 ? gamma_max(lambda) : 1.0;
    auto line_weight = [weight](double x) {
        if (weight == LoopWeight::m1)
            return unit_m1_weight(x);
        const double propagator = 1.0 / (x + 1.0);
        return propagator * propagator;
    };
    auto integrand = [&](double x) {
        double outer = 0.0;
        if (scheme == Scheme::none)
            outer = angular_average_propagator(x, q2);
        else if (scheme == Scheme::zero_momentum)
            outer = angular_average_difference(x, q2, 0.0);
        else
            outer = angular_average_difference(x, q2, -1.0);
        return line_weight(x) * outer;
    };
    const bool trivially_zero = (scheme == Scheme::zero_momentum && q2 == 0.0) || (scheme == Scheme::on_shell && q2 == -1.0);
    LoopResult result;
    if (!trivially_zero)
        result = radial_integral(integrand, std::abs(q2) + 1.0, cfg, kernel_breaks(q2));
    result.value *= prefactor;
    result.error_estimate *= prefactor;
    result.subtraction_degree = scheme == Scheme::none ? -1 : std::max(degree, 0);
    return result;
}

} // namespace phi4
