#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "combinatorics.hpp"
#include "error.hpp"
#include "grids.hpp"
#include "splitting.hpp"

namespace phi4 {

struct DataTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/** Pass/fail record of one inequality over a parameter grid. */
struct Certificate {
    std::string id;
    std::string grid;
    bool pass = false;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::string worst_point;
    DataTable table;
    std::vector<std::string> notes;

    void record_margin(double margin, const std::string& point)
    {
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_point = point;
        }
    }
    void finalize() { pass = worst_margin >= 0.0; }
};

inline std::string describe_point(std::initializer_list<std::pair<const char*, double>> entries)
{
    std::ostringstream out;
    out.precision(6);
    bool first = true;
    for (const auto& [name, value] : entries) {
        out << (first ? "" : ", ") << name << "=" << value;
        first = false;
    }
    return out.str();
}

/** B-term ratio; must stay >= 1 for odd n in (7, 200]. */
inline double fd0_ratio(double order, double lambda, double d0)
{
    const double numerator = (1.0 + 3.0 * lambda * (order - 2) * (order - 3)) * (1.0 + order * (order - 1) * d0) *
                             (order - 3) * (order - 3) * tree_term_count(order - 2);
    const double denominator = (1.0 + 3.0 * lambda * order * (order - 1)) * (1.0 + (order - 2) * (order - 3) * d0) *
                               (order - 5) * (order - 5) * tree_term_count(order);
    return numerator / denominator;
}

/** A-term ratio; must stay <= 1 for odd n in (7, 200]. */
inline double fd1_ratio(double order, double d0)
{
    const double numerator = (order + 1) * (order + 2) * (1.0 + order * (order - 1) * d0) *
                             tree_term_count(order + 2) * (order - 2) * (order - 3);
    const double denominator = order * (order - 1) * (1.0 + (order + 1) * (order + 2) * d0) *
                               tree_term_count(order) * order * (order - 1);
    return numerator / denominator;
}

struct OrderRange {
    int first = 9;
    int last = 199;
};

inline void validate_range(const OrderRange& range)
{
    require(range.first > 7 && range.last <= 200 && range.first <= range.last,
            "order range must lie in (7, 200] and be non-empty");
    require(range.first % 2 == 1, "order range must start at an odd order");
}

inline double limit_tolerance()
{
    return 0.05;
}

inline Certificate check_fd0(const std::vector<double>& lambdas, const std::vector<double>& d0s,
                             const OrderRange& range = {})
{
    validate_range(range);
    require(!lambdas.empty() && !d0s.empty(), "check_fd0: empty lambda or d0 grid");
    Certificate cert;
    cert.id = "fd0";
    cert.grid = "n=" + std::to_string(range.first) + ".." + std::to_string(range.last) + " odd; " +
                std::to_string(lambdas.size()) + " lambda x " + std::to_string(d0s.size()) + " d0";
    cert.table.columns = {"lambda", "d0", "n", "ratio"};
    for (double lambda : lambdas) {
        for (double d0 : d0s) {
            double previous = std::numeric_limits<double>::infinity();
            double ratio = 0.0;
            for (int order = range.first; order <= range.last; order += 2) {
                ratio = fd0_ratio(order, lambda, d0);
                cert.table.rows.push_back({lambda, d0, static_cast<double>(order), ratio});
                const auto point = describe_point({{"lambda", lambda}, {"d0", d0}, {"n", order}});
                cert.record_margin(ratio - 1.0, point + " (ratio >= 1)");
                if (std::isfinite(previous))
                    cert.record_margin(previous - ratio, point + " (decreasing)");
                previous = ratio;
            }
            if (range.last >= 199)
                cert.record_margin(limit_tolerance() - std::abs(ratio - 1.0),
                                   describe_point({{"lambda", lambda}, {"d0", d0}}) + " (limit near 1)");
        }
    }
    cert.finalize();
    return cert;
}

inline Certificate check_fd1(const std::vector<double>& d0s, const OrderRange& range = {})
{
    validate_range(range);
    require(!d0s.empty(), "check_fd1: empty d0 grid");
    Certificate cert;
    cert.id = "fd1";
    cert.grid = "n=" + std::to_string(range.first) + ".." + std::to_string(range.last) + " odd; " +
                std::to_string(d0s.size()) + " d0";
    cert.table.columns = {"d0", "n", "ratio"};
    for (double d0 : d0s) {
        double previous = -std::numeric_limits<double>::infinity();
        double ratio = 0.0;
        for (int order = range.first; order <= range.last; order += 2) {
            ratio = fd1_ratio(order, d0);
            cert.table.rows.push_back({d0, static_cast<double>(order), ratio});
            const auto point = describe_point({{"d0", d0}, {"n", order}});
            cert.record_margin(1.0 - ratio, point + " (ratio <= 1)");
            if (std::isfinite(previous))
                cert.record_margin(ratio - previous, point + " (increasing)");
            previous = ratio;
        }
        if (range.last >= 199)
            cert.record_margin(limit_tolerance() - std::abs(ratio - 1.0),
                               describe_point({{"d0", d0}}) + " (limit near 1)");
    }
    cert.finalize();
    return cert;
}

/** Ratio H^2_max / M_1 at q^2 (m = 1). */
inline double h2max_over_m1(double q2, double lambda)
{
    const double shifted = q2 + 1.0;
    const double power = std::pow(shifted, M_PI * M_PI / 54.0);
    return (shifted + 6.0 * lambda * lambda * power) / (shifted * (1.0 + 6.0 * power));
}

/** First-step H^2 constant at one q^2, before taking the sup. */
inline double k11_at(double q2, double lambda)
{
    const double power = std::pow(q2 + 1.0, M_PI * M_PI / 54.0);
    const double coupling = 6.0 * lambda * lambda * power;
    return coupling * (1.0 + coupling) / (1.0 + 6.0 * power);
}

struct NamedConstant {
    std::string name;
    double value = 0.0;
    double quoted_threshold = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();
};

/** Lambda in (0, upper] where an increasing function crosses 1, NaN if it stays below. */
inline double crossing_point(const std::function<double(double)>& function, double upper = 1.0)
{
    const double low = 1e-9;
    if (function(upper) < 1.0 || function(low) >= 1.0)
        return std::numeric_limits<double>::quiet_NaN();
    auto shifted = [&](double lambda) { return function(lambda) - 1.0; };
    boost::math::tools::eps_tolerance<double> tolerance(50);
    std::uintmax_t iterations = 200;
    auto [left, right] = boost::math::tools::toms748_solve(shifted, low, upper, tolerance, iterations);
    return 0.5 * (left + right);
}

/** Closed-form contraction constants as functions of lambda. */
struct ContractionFormulas {
    RenormBoundConstants constants;
    std::vector<double> grid = radial_grid();
    bool four_dim_constants = false;

    static double k_zero(double lambda) { return 48.0 * lambda * lambda * (1.0 + 10.0 * lambda); }
    static double k_nu1(double lambda) { return k_zero(lambda); }
    static double k_nu3(double lambda) { return lambda * (1.0 + 144.0 * lambda * lambda * (1.0 + 10.0 * lambda)); }
    static double k13_linear(double lambda) { return lambda * (1.0 + 18.0 * lambda * lambda); }
    static double k13_squared(double lambda) { return lambda * (1.0 + 324.0 * lambda * lambda); }
    static double k1_first(double lambda) { return 12.0 * lambda; }
    static double k1_second(double lambda) { return 12.0 * lambda; }
    static double k1_third(double lambda) { return 6.0 * lambda * lambda; }
    static double k1(double lambda) { return k1_first(lambda) + k1_second(lambda) + k1_third(lambda); }

    double k11(double lambda) const
    {
        double worst = k11_at(0.0, lambda);
        for (double q2 : grid)
            worst = std::max(worst, k11_at(q2, lambda));
        return worst;
    }

    double renorm_shift(double lambda) const
    {
        if (!four_dim_constants)
            return 1.0 + 0.18 * lambda;
        const RenormBoundConstants scaled = current(lambda);
        return 1.0 + scaled.rho0 + lambda * std::abs(scaled.a0) + 0.18 * lambda;
    }

    RenormBoundConstants current(double lambda) const
    {
        RenormBoundConstants scaled = constants;
        scaled.gamma_max = gamma_max(lambda);
        return scaled;
    }

    double sup_h2_ratio(double lambda) const
    {
        double worst = h2max_over_m1(0.0, lambda);
        for (double q2 : grid)
            worst = std::max(worst, h2max_over_m1(q2, lambda));
        return worst;
    }

    double k3_a(double lambda) const { return 108.0 * std::pow(lambda, 4) * k1(lambda); }
    double k3_b1(double lambda) const { return std::pow(6.0 * lambda, 3) * (1.0 + 9.0 * lambda); }
    double k3_b2(double lambda) const { return 9.0 * lambda * (1.0 + 6.0 * lambda * lambda) / renorm_shift(lambda); }
    double k3_b3(double lambda) const { return 18.0 * lambda * sup_h2_ratio(lambda) / renorm_shift(lambda); }
    double k3(double lambda) const { return k3_a(lambda) + k3_b1(lambda) + k3_b2(lambda) + k3_b3(lambda); }

    double k_gamma(double lambda) const
    {
        const double gmax = gamma_max(lambda);
        const double m1_zero = 7.0 * gmax;
        return 3.0 * k1(lambda) * gmax / (m1_zero * m1_zero) + k3(lambda) * gmax * gmax;
    }
    double k_rho(double lambda) const { return lambda * k3(lambda); }
};

inline std::vector<NamedConstant> contraction_table(double lambda, const ContractionFormulas& formulas = {})
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<NamedConstant, std::function<double(double)>>> entries = {
        {{"k0", 0, 0.1, nan}, &ContractionFormulas::k_zero},
        {{"k_nu1", 0, 0.101, nan}, &ContractionFormulas::k_nu1},
        {{"k11", 0, nan, nan}, [&](double l) { return formulas.k11(l); }},
        {{"k13_linear", 0, 0.1, nan}, &ContractionFormulas::k13_linear},
        {{"k13_squared", 0, 0.1, nan}, &ContractionFormulas::k13_squared},
        {{"k1n_linear", 0, nan, nan}, [](double l) { return ContractionFormulas::k13_linear(l) / 16.0; }},
        {{"k1n_squared", 0, nan, nan}, [](double l) { return ContractionFormulas::k13_squared(l) / 16.0; }},
        {{"k_nu3", 0, 0.135, nan}, &ContractionFormulas::k_nu3},
        {{"K1_1", 0, 0.08, nan}, &ContractionFormulas::k1_first},
        {{"K1_2", 0, 0.08, nan}, &ContractionFormulas::k1_second},
        {{"K1_3", 0, nan, nan}, &ContractionFormulas::k1_third},
        {{"K1", 0, 0.04, nan}, &ContractionFormulas::k1},
        {{"K3_A", 0, 0.08, nan}, [&](double l) { return formulas.k3_a(l); }},
        {{"K3_B1", 0, 0.05, nan}, [&](double l) { return formulas.k3_b1(l); }},
        {{"K3_B2", 0, 0.1, nan}, [&](double l) { return formulas.k3_b2(l); }},
        {{"K3_B3", 0, 0.05, nan}, [&](double l) { return formulas.k3_b3(l); }},
        {{"K3", 0, 0.05, nan}, [&](double l) { return formulas.k3(l); }},
        {{"K_gamma", 0, 0.05, nan}, [&](double l) { return formulas.k_gamma(l); }},
        {{"K_rho", 0, 0.05, nan}, [&](double l) { return formulas.k_rho(l); }},
        {{"k0_plus_K1", 0, 0.04, nan}, [](double l) { return ContractionFormulas::k_zero(l) + ContractionFormulas::k1(l); }},
    };
    std::vector<NamedConstant> table;
    for (auto& [constant, function] : entries) {
        constant.value = function(lambda);
        constant.threshold = crossing_point(function);
        table.push_back(constant);
    }
    return table;
}

/** Certificate that every named contraction constant is below 1 at lambda; the k0+K1 sum is only reported. */
inline Certificate contraction_constants(double lambda, const ContractionFormulas& formulas = {})
{
    require(lambda > 0.0 && std::isfinite(lambda), "contraction_constants: lambda must be positive");
    Certificate cert;
    cert.id = "contraction_constants";
    cert.grid = describe_point({{"lambda", lambda}}) + "; q^2 sups over " + std::to_string(formulas.grid.size()) +
                "-point radial grid plus q^2=0";
    cert.table.columns = {"lambda", "value", "quoted_threshold", "threshold"};
    for (const auto& constant : contraction_table(lambda, formulas)) {
        cert.table.rows.push_back({lambda, constant.value, constant.quoted_threshold, constant.threshold});
        cert.notes.push_back(constant.name);
        if (constant.name == "k0_plus_K1")
            continue;
        cert.record_margin(1.0 - constant.value, constant.name + " at " + describe_point({{"lambda", lambda}}));
    }
    cert.finalize();
    return cert;
}

/** Value quoted for the constants plot next to the value the closed form gives. */
struct AnchorCheck {
    std::string name;
    double lambda = 0.0;
    double quoted_value = 0.0;
    double computed = 0.0;
    double relative_error = 0.0;
    bool pass = false;
};

inline std::vector<AnchorCheck> plotted_anchors(double tolerance = 0.02, const ContractionFormulas& formulas = {})
{
    const double lambda = 0.101;
    std::vector<AnchorCheck> checks = {
        {"k_nu1", lambda, 0.9925, ContractionFormulas::k_nu1(lambda)},
        {"k13_linear", lambda, 0.4189, ContractionFormulas::k13_linear(lambda)},
        {"k13_squared", lambda, 0.4189, ContractionFormulas::k13_squared(lambda)},
        {"k_nu3", lambda, 0.40, ContractionFormulas::k_nu3(lambda)},
        {"k11", lambda, 0.1846, formulas.k11(lambda)},
    };
    for (auto& check : checks) {
        check.relative_error = std::abs(check.computed - check.quoted_value) / check.quoted_value;
        check.pass = check.relative_error <= tolerance;
    }
    return checks;
}

/** Largest lambda on the grid where k0 + K1 < 1. */
inline double combined_condition_limit(const std::vector<double>& lambdas)
{
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double lambda : lambdas)
        if (ContractionFormulas::k_zero(lambda) + ContractionFormulas::k1(lambda) < 1.0)
            best = std::isnan(best) ? lambda : std::max(best, lambda);
    return best;
}

struct CertifyConfig {
    std::vector<double> lambdas = {0.01, 0.02, 0.03, 0.04, 0.05};
    std::vector<double> d0s = linear_grid(0.02, 0.45, 10);
    OrderRange range;
    double lambda = 0.04;  // coupling of the contraction-constant certificate
    std::vector<double> curve_lambdas = linear_grid(0.001, 0.15, 150);
    double anchor_tolerance = 0.02;
};

/** Every certificate of one configuration plus the constants-versus-lambda curves. */
struct CertifyBundle {
    std::vector<Certificate> certificates;
    std::vector<AnchorCheck> anchors;
    DataTable constant_curves;
    double combined_limit = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;

    bool anchors_pass() const
    {
        return std::all_of(anchors.begin(), anchors.end(), [](const AnchorCheck& a) { return a.pass; });
    }
};

inline CertifyBundle certify_all(const CertifyConfig& config, const ContractionFormulas& formulas = {})
{
    require(!config.lambdas.empty(), "certify: empty lambda grid");
    require(!config.d0s.empty(), "certify: empty d0 grid");
    require(!config.curve_lambdas.empty(), "certify: empty curve lambda grid");
    CertifyBundle bundle;
    bundle.certificates.push_back(check_fd0(config.lambdas, config.d0s, config.range));
    bundle.certificates.push_back(check_fd1(config.d0s, config.range));
    bundle.certificates.push_back(contraction_constants(config.lambda, formulas));
    bundle.anchors = plotted_anchors(config.anchor_tolerance, formulas);
    bundle.combined_limit = combined_condition_limit(config.curve_lambdas);
    bundle.constant_curves.columns = {"lambda"};
    for (const auto& constant : contraction_table(config.curve_lambdas.front(), formulas))
        bundle.constant_curves.columns.push_back(constant.name);
    for (double lambda : config.curve_lambdas) {
        std::vector<double> row{lambda};
        for (const auto& constant : contraction_table(lambda, formulas))
            row.push_back(constant.value);
        bundle.constant_curves.rows.push_back(row);
    }
    bundle.pass = std::all_of(bundle.certificates.begin(), bundle.certificates.end(),
                              [](const Certificate& c) { return c.pass; });
    return bundle;
}

} // namespace phi4
