#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "certify.hpp"
#include "error.hpp"
#include "iteration.hpp"
#include "loops.hpp"
#include "splitting.hpp"
#include "trees.hpp"
#include "zerodim.hpp"

namespace phi4::cli {

using Json = nlohmann::ordered_json;

/** Resolved settings of one invocation. Defaults apply to every subcommand that reads the field. */
struct RunConfig {
    std::string command;
    std::string mode = "4d";
    double lambda = 0.02;
    std::vector<double> lambda_grid = {0.01, 0.02, 0.03, 0.04, 0.05};
    std::vector<double> d0_grid = linear_grid(0.02, 0.45, 10);
    int n_max = 7;
    int n_first = 9;
    int n_last = 199;
    double tol = 1e-8;  // the 4d iterate command defaults to 1e-5
    int max_iter = 500;
    int nu_max = 20;
    double d0 = -1.0;
    std::string closure = "tree";
    std::string gamma_rule = "input";
    bool membership = true;
    std::string which = "n3";
    std::vector<double> q2;  // empty selects the radial grid
    std::string variant = "plain";
    std::string scheme = "on_shell";
    std::string weight = "m1";
    QuadratureConfig quadrature;
    RadialGridSpec grid;
    int vertex_scales = 8;
    std::string out = "phi4_out";
};

inline std::string number(double value)
{
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

inline std::string number_list(const std::vector<double>& values)
{
    std::string text;
    for (std::size_t i = 0; i < values.size(); ++i)
        text += (i ? "," : "") + number(values[i]);
    return text;
}

/** Checks every field the command reads; the message starts with the offending field name. */
inline void validate(const RunConfig& c)
{
    auto check = [](bool ok, const std::string& field, const std::string& what) {
        if (!ok)
            throw config_error(field + ": " + what);
    };
    const std::string& cmd = c.command;
    const bool four_dim = cmd == "fundamental" || (cmd == "iterate" && c.mode == "4d");
    check(std::isfinite(c.lambda) && c.lambda > 0.0, "lambda", "must be positive, got " + number(c.lambda));
    if (four_dim)
        check(c.lambda <= 0.05, "lambda", "must lie in (0, 0.05] for the four-dimensional map, got " + number(c.lambda));
    check(c.mode == "0d" || c.mode == "4d", "mode", "must be '0d' or '4d', got '" + c.mode + "'");
    check(c.n_max % 2 == 1 && c.n_max >= 5, "n_max", "must be odd and >= 5, got " + std::to_string(c.n_max));
    check(c.tol > 0.0, "tol", "must be positive");
    check(c.max_iter > 0, "max_iter", "must be positive");
    check(c.nu_max > 0, "nu_max", "must be positive");
    check(c.d0 < 0.0 || c.d0 > 0.0, "d0", "must be positive (or negative for the default)");
    parse_closure(c.closure);
    parse_gamma_rule(c.gamma_rule);
    check(c.which == "n2" || c.which == "n3" || c.which == "dn3", "which", "must be n2, n3 or dn3, got '" + c.which + "'");
    parse_variant(c.variant);
    parse_scheme(c.scheme);
    parse_weight(c.weight);
    check(!c.lambda_grid.empty(), "lambda_grid", "must not be empty");
    for (double lambda : c.lambda_grid)
        check(lambda > 0.0 && std::isfinite(lambda), "lambda_grid", "entries must be positive");
    check(!c.d0_grid.empty(), "d0_grid", "must not be empty");
    for (double d0 : c.d0_grid)
        check(d0 > 0.0 && std::isfinite(d0), "d0_grid", "entries must be positive");
    check(c.n_first > 7 && c.n_first % 2 == 1 && c.n_last <= 200 && c.n_first <= c.n_last, "n_range",
          "needs odd n_first > 7, n_last <= 200 and n_first <= n_last");
    check(c.quadrature.rel_tol > 0.0, "rel_tol", "must be positive");
    check(c.quadrature.abs_tol > 0.0, "abs_tol", "must be positive");
    check(c.quadrature.radial_cutoff >= 1e3, "cutoff", "must be at least 1e3");
    for (double q2 : c.q2)
        check(std::isfinite(q2) && q2 > -1.0, "q2", "entries must be finite and above the mass shell -1");
    check(c.grid.low > 0.0 && c.grid.high > c.grid.low && c.grid.points >= 2, "grid",
          "needs 0 < grid-low < grid-high and grid-points >= 2");
    check(c.vertex_scales >= 2, "vertex_scales", "must be at least 2");
    check(!c.out.empty(), "out", "must not be empty");
}

/** Canonical key=value text of the fields that determine the outputs (the output directory excluded). */
inline std::string canonical(const RunConfig& c)
{
    std::vector<std::pair<std::string, std::string>> fields = {{"command", c.command}};
    auto add = [&](const std::string& key, const std::string& value) { fields.emplace_back(key, value); };
    auto add_quadrature = [&] {
        add("rel_tol", number(c.quadrature.rel_tol));
        add("abs_tol", number(c.quadrature.abs_tol));
        add("cutoff", number(c.quadrature.radial_cutoff));
        add("max_subdivisions", std::to_string(c.quadrature.max_subdivisions));
    };
    auto add_grid = [&] {
        add("grid_low", number(c.grid.low));
        add("grid_high", number(c.grid.high));
        add("grid_points", std::to_string(c.grid.points));
    };
    if (c.command == "solve0d" || (c.command == "iterate" && c.mode == "0d")) {
        add("mode", "0d");
        add("lambda", number(c.lambda));
        add("n_max", std::to_string(c.n_max));
        add("tol", number(c.tol));
        add("max_iter", std::to_string(c.max_iter));
        add("closure", c.closure);
        add("d0", number(c.d0));
    } else if (c.command == "fundamental") {
        add("lambda", number(c.lambda));
        add("n_max", std::to_string(c.n_max));
        add("d0", number(c.d0));
        add("variant", c.variant);
        add("vertex_scales", std::to_string(c.vertex_scales));
        add_quadrature();
        add_grid();
    } else if (c.command == "iterate") {
        add("mode", "4d");
        add("lambda", number(c.lambda));
        add("n_max", std::to_string(c.n_max));
        add("nu_max", std::to_string(c.nu_max));
        add("tol", number(c.tol));
        add("closure", c.closure);
        add("gamma_rule", c.gamma_rule);
        add("membership", c.membership ? "true" : "false");
        add("d0", number(c.d0));
        add("variant", c.variant);
        add("vertex_scales", std::to_string(c.vertex_scales));
        add_quadrature();
        add_grid();
    } else if (c.command == "loops") {
        add("which", c.which);
        add("lambda", number(c.lambda));
        add("variant", c.variant);
        add("scheme", c.scheme);
        add("weight", c.weight);
        add("q2", number_list(c.q2));
        add_quadrature();
        add_grid();
    } else if (c.command == "certify") {
        add("lambda", number(c.lambda));
        add("lambda_grid", number_list(c.lambda_grid));
        add("d0_grid", number_list(c.d0_grid));
        add("n_first", std::to_string(c.n_first));
        add("n_last", std::to_string(c.n_last));
    }
    std::string text;
    for (const auto& [key, value] : fields)
        text += key + "=" + value + "\n";
    return text;
}

/** 64-bit FNV-1a digest of the canonical configuration, as 16 hex digits. */
inline std::string config_hash(const RunConfig& c)
{
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char ch : canonical(c)) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

/** Writes the output files of one run, each stamped with the configuration hash. */
class Artifacts {
public:
    Artifacts(const RunConfig& config) : dir_(config.out), hash_(config_hash(config)), canonical_(canonical(config))
    {
        std::filesystem::create_directories(dir_);
    }

    const std::string& hash() const { return hash_; }

    void csv(const std::string& name, const std::vector<std::string>& columns,
             const std::vector<std::vector<double>>& rows, const std::vector<std::string>& labels = {}) const
    {
        std::ofstream file(path(name));
        file << "# config_hash=" << hash_ << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            file << (i ? "," : "") << columns[i];
        file << "\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!labels.empty())
                file << labels.at(r) << ",";
            for (std::size_t i = 0; i < rows[r].size(); ++i)
                file << (i ? "," : "") << number(rows[r][i]);
            file << "\n";
        }
        check(file, name);
    }

    void csv(const std::string& name, const DataTable& table) const { csv(name, table.columns, table.rows); }

    void json(const std::string& name, const std::string& schema, Json body) const
    {
        Json document;
        document["schema"] = schema;
        document["config_hash"] = hash_;
        Json config = Json::object();
        std::istringstream lines(canonical_);
        for (std::string line; std::getline(lines, line);) {
            const auto split = line.find('=');
            config[line.substr(0, split)] = line.substr(split + 1);
        }
        document["config"] = config;
        for (auto& [key, value] : body.items())
            document[key] = value;
        std::ofstream file(path(name));
        file << document.dump(2) << "\n";
        check(file, name);
    }

private:
    std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

    static void check(const std::ofstream& file, const std::string& name)
    {
        if (!file)
            throw numerical_error("could not write " + name);
    }

    std::string dir_;
    std::string hash_;
    std::string canonical_;
};

inline Json json_number(double value)
{
    if (std::isfinite(value))
        return value;
    return number(value);
}

inline Json json_numbers(const std::vector<double>& values)
{
    Json array = Json::array();
    for (double value : values)
        array.push_back(json_number(value));
    return array;
}

inline int run_solve0d(const RunConfig& c, std::ostream& out, bool as_iterate = false)
{
    const Artifacts artifacts(c);
    ZeroDimOptions options;
    options.closure = parse_closure(c.closure);
    options.d0 = c.d0;
    const ZeroDimSolution solution = solve_zerodim(c.lambda, c.n_max, c.tol, c.max_iter, options);
    const double d0 = c.d0 < 0.0 ? default_d0(c.lambda) : c.d0;
    const SplittingBounds bounds =
        make_splitting_bounds(c.lambda, renorm_bound_constants(c.lambda, Mode::zero_dim), d0, c.n_max);
    bool within = true;
    Json table = Json::array();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < solution.deltas.size(); ++i) {
        const int order = 3 + 2 * static_cast<int>(i);
        const DeltaPair pair = bounds.at(order);
        const double delta = solution.deltas[i];
        const bool ok = delta >= pair.min && delta <= pair.max;
        within = within && ok;
        table.push_back({{"n", order}, {"delta", delta}, {"delta_min", pair.min}, {"delta_max", pair.max},
                         {"within_bounds", ok}});
        rows.push_back({static_cast<double>(order), delta, pair.min, pair.max, ok ? 1.0 : 0.0});
    }
    std::vector<std::vector<double>> history;
    const auto& diagnostics = solution.diagnostics;
    for (std::size_t i = 0; i < diagnostics.distances.size(); ++i)
        history.push_back({static_cast<double>(i + 1), diagnostics.distances[i],
                           i == 0 ? std::nan("") : diagnostics.ratios[i - 1]});
    Json body;
    body["lambda"] = c.lambda;
    body["n_max"] = c.n_max;
    body["iterations"] = diagnostics.iterations;
    body["converged"] = diagnostics.converged;
    body["signs_alternate_every_iterate"] = diagnostics.signs_alternate_every_iterate;
    body["deltas_within_bounds"] = within;
    body["h"] = json_numbers(solution.sequence.values);
    body["deltas"] = table;
    body["ratios"] = json_numbers(diagnostics.ratios);
    const std::string stem = as_iterate ? "iterate" : "solve0d";
    body["mode"] = "0d";
    artifacts.json(stem + ".json", "phi4." + stem + "/1", body);
    artifacts.csv(stem + "_deltas.csv", {"n", "delta", "delta_min", "delta_max", "within_bounds"}, rows);
    artifacts.csv(stem + "_steps.csv", {"nu", "distance", "ratio"}, history);
    out << stem << ": " << diagnostics.iterations << " iterations, delta_3 = " << number(solution.deltas.front())
        << (within ? ", all deltas within bounds" : ", deltas OUTSIDE bounds") << " [" << artifacts.hash() << "]\n";
    return diagnostics.converged && within ? 0 : 1;
}

inline LayoutSpec layout_spec(const RunConfig& c)
{
    LayoutSpec spec;
    spec.radial = c.grid;
    spec.vertex_scales = c.vertex_scales;
    return spec;
}

inline FundamentalOptions fundamental_options(const RunConfig& c)
{
    FundamentalOptions options;
    options.variant = parse_variant(c.variant);
    options.d0 = c.d0;
    options.grid = c.grid;
    return options;
}

inline int run_fundamental(const RunConfig& c, std::ostream& out)
{
    const Artifacts artifacts(c);
    auto tree = build_fundamental(c.lambda, c.n_max, c.quadrature, fundamental_options(c));
    auto layout = std::make_shared<const SampleLayout>(make_layout(c.n_max, layout_spec(c)));
    const GreenSequence green = sample_tree(*tree, layout);
    std::vector<std::vector<double>> h2_rows;
    for (std::size_t i = 0; i < tree->h2_grid.size(); ++i) {
        const double q2 = tree->h2_grid[i];
        h2_rows.push_back({q2, tree->h2_values[i], tree->two_point_shift(q2)});
    }
    std::vector<std::vector<double>> vertex_rows;
    for (std::size_t s = 0; s < layout->scales.size(); ++s)
        for (int order = 3; order <= c.n_max; order += 2)
            for (int active = 0; active <= order; ++active)
                vertex_rows.push_back({layout->scales[s], static_cast<double>(order), static_cast<double>(active),
                                       green.at(order, active, s)});
    Json splitting = Json::array();
    for (const auto& [order, delta] : tree->splitting) {
        const DeltaPair pair = tree->bounds.at(order);
        splitting.push_back({{"n", order}, {"delta", delta}, {"delta_min", pair.min}, {"delta_max", pair.max}});
    }
    const RenormBoundConstants& k = tree->constants;
    Json body;
    body["lambda"] = c.lambda;
    body["n_max"] = c.n_max;
    body["constants"] = {{"gamma0", k.gamma0}, {"a0", k.a0},           {"rho0", k.rho0},
                         {"gamma_max", k.gamma_max}, {"rho_max", k.rho_max}, {"a_max", k.a_max}};
    body["b0"] = tree->b0;
    body["b1"] = tree->b1;
    body["splitting"] = splitting;
    body["signs_alternate"] = signs_alternate(green);
    body["shell_limit"] = green.amputated_two_point(-1.0 + 1e-6);
    body["h2_grid"] = json_numbers(tree->h2_grid);
    body["h2_values"] = json_numbers(tree->h2_values);
    artifacts.json("fundamental.json", "phi4.fundamental/1", body);
    artifacts.csv("fundamental_h2.csv", {"q2", "h2", "shift"}, h2_rows);
    artifacts.csv("fundamental_vertices.csv", {"t", "n", "active", "value"}, vertex_rows);
    out << "fundamental: lambda = " << number(c.lambda) << ", delta_3 = " << number(tree->delta3)
        << ", H2 Delta_F at the shell = " << number(green.amputated_two_point(-1.0 + 1e-6)) << " ["
        << artifacts.hash() << "]\n";
    return 0;
}

inline int run_iterate(const RunConfig& c, std::ostream& out)
{
    if (c.mode == "0d")
        return run_solve0d(c, out, true);
    const Artifacts artifacts(c);
    IterationOptions options;
    options.n_max = c.n_max;
    options.map.closure = parse_closure(c.closure);
    options.map.gamma = parse_gamma_rule(c.gamma_rule);
    options.map.check_membership = c.membership;
    options.map.d0 = c.d0;
    options.fundamental = fundamental_options(c);
    options.layout = layout_spec(c);
    options.quadrature = c.quadrature;
    const IterationResult result = phi44_iterate(c.lambda, c.nu_max, c.tol, options);
    const IterationReport& report = result.report;
    std::vector<std::vector<double>> rows;
    for (const auto& s : report.steps)
        rows.push_back({static_cast<double>(s.nu), s.distance, s.ball_distance, s.ratio, s.band, s.delta3, s.gamma,
                        s.splitting_margin, s.h2_lower, s.h2_upper, s.signs ? 1.0 : 0.0, s.splitting ? 1.0 : 0.0,
                        s.renorm ? 1.0 : 0.0});
    Json body;
    body["mode"] = "4d";
    body["lambda"] = c.lambda;
    body["n_max"] = c.n_max;
    body["r0"] = report.r0;
    body["radius"] = {{"splitting_gap", report.radius.splitting_gap},
                      {"two_point_gap", report.radius.two_point_gap},
                      {"loop_gap", report.radius.loop_gap}};
    body["fundamental_norm"] = report.fundamental_norm;
    body["nu_reached"] = report.nu_reached;
    body["converged"] = report.converged;
    body["left_ball"] = report.left_ball;
    body["membership_failed"] = report.membership_failed;
    body["stop_reason"] = report.stop_reason;
    body["distances_decrease"] = report.distances_decrease();
    body["within_ball"] = report.within_ball();
    body["signs_and_bounds_kept"] = report.signs_and_bounds_kept();
    artifacts.json("iterate.json", "phi4.iterate/1", body);
    artifacts.csv("iterate_steps.csv",
                  {"nu", "distance", "ball_distance", "ratio", "band", "delta3", "gamma", "splitting_margin",
                   "h2_lower", "h2_upper", "signs", "splitting", "renorm"},
                  rows);
    out << "iterate: " << report.nu_reached << " steps, " << report.stop_reason << " [" << artifacts.hash() << "]\n";
    return report.converged ? 0 : 1;
}

inline int run_loops(const RunConfig& c, std::ostream& out)
{
    const Artifacts artifacts(c);
    const std::vector<double> grid = c.q2.empty() ? radial_grid(c.grid) : c.q2;
    std::vector<LoopResult> results(grid.size());
    const SunsetVariant variant = parse_variant(c.variant);
    const Scheme scheme = parse_scheme(c.scheme);
    const LoopWeight weight = parse_weight(c.weight);
    parallel_for(grid.size(), [&](std::size_t i) {
        if (c.which == "n2")
            results[i] = n2_tilde(grid[i], c.lambda, c.quadrature, weight, scheme);
        else if (c.which == "n3")
            results[i] = n3_tilde(grid[i], c.lambda, c.quadrature, variant, scheme);
        else
            results[i] = n3_derivative(grid[i], c.lambda, c.quadrature, variant, scheme);
    });
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < grid.size(); ++i)
        rows.push_back({grid[i], results[i].value, results[i].error_estimate});
    artifacts.csv("loops_" + c.which + ".csv", {"q2", "value", "error"}, rows);
    out << "loops: " << c.which << " on " << grid.size() << " points [" << artifacts.hash() << "]\n";
    return 0;
}

inline int run_certify(const RunConfig& c, std::ostream& out)
{
    const Artifacts artifacts(c);
    CertifyConfig config;
    config.lambdas = c.lambda_grid;
    config.d0s = c.d0_grid;
    config.range = {c.n_first, c.n_last};
    config.lambda = c.lambda;
    const CertifyBundle bundle = certify_all(config);
    Json certificates = Json::array();
    for (const auto& cert : bundle.certificates) {
        if (cert.notes.size() == cert.table.rows.size() && !cert.notes.empty()) {
            std::vector<std::string> columns = {"constant"};
            columns.insert(columns.end(), cert.table.columns.begin(), cert.table.columns.end());
            artifacts.csv("certify_" + cert.id + ".csv", columns, cert.table.rows, cert.notes);
        } else {
            artifacts.csv("certify_" + cert.id + ".csv", cert.table);
        }
        certificates.push_back({{"id", cert.id},
                                {"grid", cert.grid},
                                {"pass", cert.pass},
                                {"worst_margin", json_number(cert.worst_margin)},
                                {"worst_point", cert.worst_point}});
    }
    artifacts.csv("certify_constant_curves.csv", bundle.constant_curves);
    std::vector<std::vector<double>> anchor_rows;
    Json anchors = Json::array();
    for (const auto& anchor : bundle.anchors) {
        anchor_rows.push_back({anchor.lambda, anchor.quoted_value, anchor.computed, anchor.relative_error,
                               anchor.pass ? 1.0 : 0.0});
        anchors.push_back({{"name", anchor.name},
                           {"lambda", anchor.lambda},
                           {"quoted", anchor.quoted_value},
                           {"computed", anchor.computed},
                           {"relative_error", anchor.relative_error},
                           {"pass", anchor.pass}});
    }
    artifacts.csv("certify_anchors.csv", {"lambda", "quoted", "computed", "relative_error", "pass"}, anchor_rows);
    Json body;
    body["pass"] = bundle.pass;
    body["certificates"] = certificates;
    body["anchors"] = anchors;
    body["anchors_pass"] = bundle.anchors_pass();
    body["combined_condition_limit"] = json_number(bundle.combined_limit);
    artifacts.json("certify_summary.json", "phi4.certify/1", body);
    for (const auto& cert : bundle.certificates)
        out << "certify: " << cert.id << (cert.pass ? " pass" : " FAIL") << " (worst margin "
            << number(cert.worst_margin) << " at " << cert.worst_point << ")\n";
    out << "certify: " << (bundle.pass ? "all certificates pass" : "some certificates FAIL") << " ["
        << artifacts.hash() << "]\n";
    return bundle.pass ? 0 : 1;
}

inline void add_quadrature_options(CLI::App* sub, RunConfig& c)
{
    sub->add_option("--rel-tol", c.quadrature.rel_tol, "Quadrature relative tolerance")->capture_default_str();
    sub->add_option("--abs-tol", c.quadrature.abs_tol, "Quadrature absolute tolerance")->capture_default_str();
    sub->add_option("--cutoff", c.quadrature.radial_cutoff, "Radial cutoff in units of m^2")->capture_default_str();
    sub->add_option("--max-subdivisions", c.quadrature.max_subdivisions, "Bisection depth per segment")
        ->capture_default_str();
}

inline void add_grid_options(CLI::App* sub, RunConfig& c)
{
    sub->add_option("--grid-low", c.grid.low, "Smallest q^2 of the radial grid")->capture_default_str();
    sub->add_option("--grid-high", c.grid.high, "Largest q^2 of the radial grid")->capture_default_str();
    sub->add_option("--grid-points", c.grid.points, "Points of the radial grid")->capture_default_str();
}

/** Parses argv, runs the subcommand and maps failures to exit codes 0/1/2. */
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    RunConfig c;
    CLI::App app{"Green's function hierarchy of the phi^4 theory: solvers, certificates and loop integrals"};
    app.set_config("--config", "", "Key=value configuration file; keys are <subcommand>.<option>");
    app.allow_config_extras(false);
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--out", c.out, "Output directory")->capture_default_str();

    auto* solve0d = app.add_subcommand("solve0d", "Zero-dimensional fixed-point iteration");
    auto* fundamental = app.add_subcommand("fundamental", "Fundamental tree sequence H_T0");
    auto* iterate = app.add_subcommand("iterate", "Fixed-point iteration in zero or four dimensions");
    auto* loops = app.add_subcommand("loops", "Renormalized loop integrals on the radial grid");
    auto* certify = app.add_subcommand("certify", "Closed-form inequality and contraction-constant certificates");

    for (auto* sub : {solve0d, fundamental, iterate, loops})
        sub->add_option("--lambda", c.lambda, "Coupling")->capture_default_str();
    auto* certify_lambda = certify->add_option("--lambda", c.lambda, "Coupling of the contraction certificate (default 0.04)");
    std::vector<CLI::Option*> tol_options;
    for (auto* sub : {solve0d, iterate}) {
        tol_options.push_back(sub->add_option("--tol", c.tol, "Convergence tolerance (default 1e-8, 4d iterate 1e-5)"));
        sub->add_option("--closure", c.closure, "Truncation closure: tree or asymptotic")->capture_default_str();
    }
    for (auto* sub : {solve0d, fundamental, iterate}) {
        sub->add_option("--n-max,--nmax", c.n_max, "Truncation order (odd)")->capture_default_str();
        sub->add_option("--d0", c.d0, "Splitting parameter d0 (negative: 0.03 lambda)")->capture_default_str();
    }
    for (auto* sub : {fundamental, iterate, loops}) {
        add_quadrature_options(sub, c);
        add_grid_options(sub, c);
        sub->add_option("--variant", c.variant, "Sunset kernel: plain or weighted")->capture_default_str();
    }
    for (auto* sub : {fundamental, iterate})
        sub->add_option("--vertex-scales", c.vertex_scales, "Vertex scale points")->capture_default_str();
    solve0d->add_option("--max-iter", c.max_iter, "Iteration cap")->capture_default_str();
    iterate->add_option("--max-iter", c.max_iter, "Iteration cap in 0d mode")->capture_default_str();
    iterate->add_option("--mode", c.mode, "0d or 4d")->capture_default_str();
    iterate->add_option("--nu-max,--numax", c.nu_max, "Iteration cap in 4d mode")->capture_default_str();
    iterate->add_option("--gamma-rule", c.gamma_rule, "gamma~ in the denominators: input or unit")->capture_default_str();
    iterate->add_option("--membership", c.membership, "Refuse inputs outside Phi_R (true/false)")->capture_default_str();
    loops->add_option("--which", c.which, "n2, n3 or dn3")->capture_default_str();
    loops->add_option("--q2", c.q2, "Momenta q^2 (default: the radial grid)")->delimiter(',');
    loops->add_option("--scheme", c.scheme, "Subtraction: none, zero_momentum or on_shell")->capture_default_str();
    loops->add_option("--weight", c.weight, "Bubble weight: unit or m1")->capture_default_str();
    certify->add_option("--lambda-grid", c.lambda_grid, "Couplings of the fd0 certificate")->delimiter(',');
    certify->add_option("--d0-grid", c.d0_grid, "d0 values of the fd0 and fd1 certificates")->delimiter(',');
    certify->add_option("--n-first", c.n_first, "First odd order")->capture_default_str();
    certify->add_option("--n-last", c.n_last, "Last order")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    for (auto* sub : app.get_subcommands())
        c.command = sub->get_name();
    if (c.command == "iterate" && c.mode == "4d" && tol_options[1]->count() == 0)
        c.tol = 1e-5;
    if (c.command == "certify" && certify_lambda->count() == 0)
        c.lambda = CertifyConfig{}.lambda;
    try {
        validate(c);
        if (c.command == "solve0d")
            return run_solve0d(c, out);
        if (c.command == "fundamental")
            return run_fundamental(c, out);
        if (c.command == "iterate")
            return run_iterate(c, out);
        if (c.command == "loops")
            return run_loops(c, out);
        return run_certify(c, out);
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "output error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace phi4::cli
