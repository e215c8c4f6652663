#pragma once

// Command-line front end: analytic, simulate, sweep-r, optimize, calibrate,
// threshold. Every command builds one ordered JSON report
// {command, config, [timestamp], results} and renders it as JSON, CSV or
// human-readable text.
//
// Exit codes: 0 success, 2 invalid arguments, 3 numerical-procedure failure.

#include <bellnoise/bellnoise.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bellnoise::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr std::uint64_t kDefaultSeed = 1;
inline constexpr std::uint64_t kDefaultTrials = 1'000'000;
inline constexpr double kDefaultR = 0.8;
inline constexpr const char* kDefaultAngles = "0,22.5,45,67.5";

enum class Format { json, csv, human };

/// "0,22.5,45,67.5" -> AngleSet. Exactly four finite numbers in degrees.
inline AngleSet parse_angles(std::string_view text) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string_view token = text.substr(pos, comma - pos);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (!token.empty() && token.front() == '+') token.remove_prefix(1);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (token.empty() || ec != std::errc() || end != token.data() + token.size() || !std::isfinite(v)) {
            throw InvalidParameter("cannot parse angle '" + std::string(token) + "' in '" + std::string(text) + "'");
        }
        values.push_back(v);
        pos = comma + 1;
    }
    if (values.size() != 4) {
        throw InvalidParameter("expected four comma-separated angles in degrees, got " +
                               std::to_string(values.size()));
    }
    return AngleSet::from_degrees(values[0], values[1], values[2], values[3]);
}

/// Shortest round-trip decimal form.
inline std::string shortest(double x) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline std::string six_digits(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string angles_argument(const AngleSet& angles) {
    const auto d = angles.degrees();
    return shortest(d[0]) + "," + shortest(d[1]) + "," + shortest(d[2]) + "," + shortest(d[3]);
}

inline Json angles_json(const AngleSet& angles) {
    const auto d = angles.degrees();
    return Json::array({d[0], d[1], d[2], d[3]});
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline std::string scalar_text(const Json& v, Format format) {
    if (v.is_null()) return format == Format::human ? "null" : "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        return format == Format::human ? six_digits(x) : shortest(x);
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline bool is_scalar_array(const Json& v) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
        if (e.is_structured()) return false;
    }
    return true;
}

inline void render_human(const Json& node, std::ostream& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string key = node.is_object() ? it.key() : "-";
        const Json& v = it.value();
        if (is_scalar_array(v)) {
            out << pad << key << ": [";
            for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << scalar_text(v[i], Format::human);
            out << "]\n";
        } else if (v.is_structured()) {
            out << pad << key << ":\n";
            render_human(v, out, indent + 1);
        } else {
            out << pad << key << ": " << scalar_text(v, Format::human) << '\n';
        }
    }
}

inline void flatten(const Json& node, const std::string& prefix, std::vector<std::pair<std::string, Json>>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        }
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], prefix + "." + std::to_string(i), out);
    } else {
        out.emplace_back(prefix, node);
    }
}

inline std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

/// CSV: '#' comment lines echo the config (and timestamp), then a header row
/// and data rows. Reports with results.rows render one line per row; others
/// render their flattened results as a single row.
inline void render_csv(const Json& report, std::ostream& out) {
    out << "# command=" << report["command"].get<std::string>() << '\n';
    std::vector<std::pair<std::string, Json>> config;
    flatten(report["config"], "", config);
    for (const auto& [k, v] : config) out << "# " << k << '=' << scalar_text(v, Format::csv) << '\n';
    if (report.contains("timestamp")) out << "# timestamp=" << report["timestamp"].get<std::string>() << '\n';

    const Json& results = report["results"];
    std::vector<const Json*> rows;
    if (results.contains("rows")) {
        for (const auto& row : results["rows"]) rows.push_back(&row);
    } else {
        rows.push_back(&results);
    }
    bool header_done = false;
    for (const Json* row : rows) {
        std::vector<std::pair<std::string, Json>> cells;
        flatten(*row, "", cells);
        if (!header_done) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i].first);
            out << '\n';
            header_done = true;
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "," : "") << csv_field(scalar_text(cells[i].second, Format::csv));
        }
        out << '\n';
    }
}

inline void render(const Json& report, Format format, std::ostream& out) {
    switch (format) {
    case Format::json: out << report.dump(2) << '\n'; break;
    case Format::csv: render_csv(report, out); break;
    case Format::human:
        out << "command: " << report["command"].get<std::string>() << '\n';
        out << "config:\n";
        render_human(report["config"], out, 1);
        if (report.contains("timestamp")) out << "timestamp: " << report["timestamp"].get<std::string>() << '\n';
        out << "results:\n";
        render_human(report["results"], out, 1);
        break;
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline Json estimators_json(const ChshResult& res) {
    Json e;
    const auto values = res.estimators();
    for (Pairing p : kPairings) e[std::string(to_string(p))] = values[static_cast<std::size_t>(p)];
    return e;
}

inline Json threshold_json(const AngleSet& angles) {
    const auto up = violation_threshold(angles, ThresholdBranch::increasing);
    const auto down = violation_threshold(angles, ThresholdBranch::decreasing);
    Json t;
    t["increasing_r"] = optional_json(up);
    t["decreasing_r"] = optional_json(down);
    t["published_standard_angles"] = kPublishedThreshold;
    t["note"] = "published figure 0.656 for the standard angles does not follow from S = sqrt(2) + r; "
                "solving S = 2 there gives 2 - sqrt(2) = 0.585786";
    return t;
}

struct AnalyticArgs {
    std::string angles = kDefaultAngles;
    double r = kDefaultR;
};

inline Json cmd_analytic(const AnalyticArgs& args) {
    const AngleSet angles = parse_angles(args.angles);
    const CorrelationCoefficient r(args.r);
    const ChshResult res = analytic_chsh(angles, r);

    Json report;
    report["command"] = "analytic";
    report["config"] = {{"angles", angles_json(angles)}, {"r", args.r}};
    Json results;
    results["estimators"] = estimators_json(res);
    results["s_value"] = res.s_value;
    results["violated"] = res.violated;
    results["threshold"] = threshold_json(angles);
    results["classical_bound"] = kClassicalBound;
    results["quantum_reference"] = kQuantumReference;
    report["results"] = std::move(results);
    return report;
}

struct SimulateArgs {
    std::string angles = kDefaultAngles;
    double r = kDefaultR;
    std::uint64_t trials = kDefaultTrials;
    std::string source = "rtw";
    std::optional<double> rho;
    double calibration_tolerance = 1e-6;
};

inline Json cmd_simulate(const SimulateArgs& args, std::uint64_t seed, unsigned threads) {
    const AngleSet angles = parse_angles(args.angles);
    const CorrelationCoefficient r(args.r);
    if (args.trials < 2) throw InvalidParameter("--trials must be at least 2");

    Json config;
    config["angles"] = angles_json(angles);
    config["r"] = args.r;
    config["trials"] = args.trials;
    config["seed"] = seed;
    config["source"] = args.source;
    config["chunk_trials"] = kChunkTrials;

    Json results;
    MonteCarloChsh mc;
    double effective_r = r.value();
    if (args.source == "gaussian") {
        double rho = 0.0;
        if (args.rho) {
            rho = *args.rho;
            config["rho"] = rho;
        } else {
            config["rho"] = "auto";
            config["calibration_tolerance"] = args.calibration_tolerance;
            rho = calibrate_gaussian(r, args.calibration_tolerance).rho;
        }
        mc = mc_chsh_detailed(gaussian_factory(rho, seed), angles, args.trials, threads);
        effective_r = gaussian_sign_correlation(rho);
        results["rho"] = rho;
    } else {
        mc = mc_chsh_detailed(rtw_factory(r, seed), angles, args.trials, threads);
    }
    results["effective_r"] = effective_r;

    const ChshResult analytic = analytic_chsh(angles, CorrelationCoefficient(effective_r));
    results["s_mc"] = mc.result.s_value;
    results["std_err"] = mc.result.std_err;
    results["violated"] = mc.result.violated;
    results["s_analytic"] = analytic.s_value;
    results["z_score"] = mc.result.std_err > 0.0
                             ? Json((mc.result.s_value - analytic.s_value) / mc.result.std_err)
                             : Json(nullptr);
    Json pairs = Json::array();
    const auto e_analytic = analytic.estimators();
    for (Pairing p : kPairings) {
        const auto k = static_cast<std::size_t>(p);
        const auto [ti, tj] = pairing_angles(angles, p);
        const PairStatistics& stats = mc.pairs[k];
        const Estimate e = mc_e(stats);
        const CoincidenceEstimates pe = estimate_p(stats);
        Json pair;
        pair["pair"] = std::string(to_string(p));
        pair["delta"] = ti.deg() - tj.deg();
        pair["e_mc"] = e.value;
        pair["std_err"] = e.std_err;
        pair["e_analytic"] = e_analytic[k];
        pair["p_vv"] = pe.p_vv;
        pair["p_hh"] = pe.p_hh;
        pair["p_vh"] = pe.p_vh;
        pair["p_hv"] = pe.p_hv;
        pair["counts"] = {{"VV", stats.trials(OutcomeLabel::vv)},
                          {"HH", stats.trials(OutcomeLabel::hh)},
                          {"VH", stats.trials(OutcomeLabel::vh)},
                          {"HV", stats.trials(OutcomeLabel::hv)}};
        pairs.push_back(std::move(pair));
    }
    results["pairs"] = std::move(pairs);
    results["classical_bound"] = kClassicalBound;
    results["quantum_reference"] = kQuantumReference;

    Json report;
    report["command"] = "simulate";
    report["config"] = std::move(config);
    report["results"] = std::move(results);
    return report;
}

struct SweepArgs {
    std::string angles = kDefaultAngles;
    double r_from = 0.0;
    double r_to = 1.0;
    double r_step = 0.1;
    std::uint64_t trials = kDefaultTrials;
    bool optimized_angles = false;
};

/// Angle sets maximizing S at r = +1 and r = -1 (lattice step 22.5).
inline std::pair<AngleSet, AngleSet> sign_matched_angles() {
    const Angle step = Angle::degrees(22.5);
    return {grid_search(CorrelationCoefficient(1.0), step).best_angles,
            grid_search(CorrelationCoefficient(-1.0), step).best_angles};
}

inline Json cmd_sweep_r(const SweepArgs& args, std::uint64_t seed, unsigned threads) {
    const AngleSet base = parse_angles(args.angles);
    const CorrelationCoefficient from(args.r_from);
    const CorrelationCoefficient to(args.r_to);
    if (!(args.r_step > 0.0)) throw InvalidParameter("--r-step must be positive");
    if (from.value() > to.value()) throw InvalidParameter("--r-from must not exceed --r-to");
    if (args.trials < 2) throw InvalidParameter("--trials must be at least 2");

    Json config;
    AngleSet positive = base;
    AngleSet negative = base;
    if (args.optimized_angles) {
        std::tie(positive, negative) = sign_matched_angles();
        config["angles_nonnegative_r"] = angles_json(positive);
        config["angles_negative_r"] = angles_json(negative);
    } else {
        config["angles"] = angles_json(base);
    }
    config["r_from"] = args.r_from;
    config["r_to"] = args.r_to;
    config["r_step"] = args.r_step;
    config["trials"] = args.trials;
    config["seed"] = seed;
    config["optimized_angles"] = args.optimized_angles;
    config["chunk_trials"] = kChunkTrials;

    const auto n_rows = static_cast<std::uint64_t>(std::floor((args.r_to - args.r_from) / args.r_step + 1e-9)) + 1;
    Json rows = Json::array();
    for (std::uint64_t k = 0; k < n_rows; ++k) {
        // snap to 1e-12 so 0.1-steps print as 0.3, not 0.30000000000000004
        double r_value = args.r_from + static_cast<double>(k) * args.r_step;
        r_value = std::clamp(std::round(r_value * 1e12) / 1e12, -1.0, 1.0);
        const CorrelationCoefficient r(r_value);
        const AngleSet& angles = r_value < 0.0 ? negative : positive;
        const ChshResult analytic = analytic_chsh(angles, r);
        const ChshResult mc = mc_chsh(r, angles, args.trials, splitmix64(seed + k), threads);
        Json row;
        row["r"] = r_value;
        row["s_analytic"] = analytic.s_value;
        row["s_mc"] = mc.s_value;
        row["std_err"] = mc.std_err;
        row["violated_analytic"] = analytic.violated;
        row["violated_mc"] = mc.violated;
        rows.push_back(std::move(row));
    }

    Json report;
    report["command"] = "sweep-r";
    report["config"] = std::move(config);
    report["results"] = {{"rows", std::move(rows)}};
    return report;
}

struct OptimizeArgs {
    double r = kDefaultR;
    double grid_step = 7.5;
    double tolerance = 1e-9;
    bool trace = false;
};

inline Json trace_json(const std::vector<TraceStep>& trace) {
    Json out = Json::array();
    for (const auto& step : trace) out.push_back({{"angles", angles_json(step.angles)}, {"s", step.s_value}});
    return out;
}

inline Json cmd_optimize(const OptimizeArgs& args, unsigned threads) {
    const CorrelationCoefficient r(args.r);
    if (!(args.grid_step > 0.0 && args.grid_step <= 45.0)) {
        throw InvalidParameter("--grid-step must lie in (0, 45] degrees");
    }
    if (!(args.tolerance > 0.0)) throw InvalidParameter("--tolerance must be positive");

    const OptimizationResult grid =
        grid_search(r, Angle::degrees(args.grid_step), {.record_trace = args.trace, .threads = threads});
    const OptimizationResult refined = refine(r, grid.best_angles, args.tolerance, {.record_trace = args.trace});
    const bool use_refined = refined.best_s > grid.best_s;
    const OptimizationResult& best = use_refined ? refined : grid;
    const double bound = std::numbers::sqrt2 + std::abs(args.r);

    Json results;
    results["best_angles"] = angles_json(best.best_angles);
    results["best_angles_arg"] = angles_argument(best.best_angles);
    results["best_s"] = best.best_s;
    results["violated"] = best.best_s > kClassicalBound;
    results["evaluations"] = grid.evaluations + refined.evaluations;
    results["grid"] = {{"best_angles", angles_json(grid.best_angles)},
                       {"best_s", grid.best_s},
                       {"evaluations", grid.evaluations}};
    results["refine"] = {{"best_angles", angles_json(refined.best_angles)},
                         {"best_s", refined.best_s},
                         {"evaluations", refined.evaluations}};
    results["bound_sqrt2_plus_abs_r"] = bound;
    results["gap_to_bound"] = bound - best.best_s;
    if (args.trace) {
        results["trace"] = {{"grid", trace_json(grid.trace)}, {"refine", trace_json(refined.trace)}};
    }

    Json report;
    report["command"] = "optimize";
    report["config"] = {{"r", args.r}, {"grid_step", args.grid_step}, {"tolerance", args.tolerance},
                        {"trace", args.trace}};
    report["results"] = std::move(results);
    return report;
}

struct CalibrateArgs {
    double target_r = 0.5;
    double tolerance = kDefaultCalibrationTolerance;
    std::uint64_t trials = kDefaultTrials;
};

inline Json cmd_calibrate(const CalibrateArgs& args, std::uint64_t seed) {
    const CorrelationCoefficient target(args.target_r);
    if (!(args.tolerance > 0.0)) throw InvalidParameter("--tolerance must be positive");
    if (args.trials < 2) throw InvalidParameter("--trials must be at least 2");

    const GaussianCalibration cal = calibrate_gaussian(target, args.tolerance);
    GaussianSignSource source(cal.rho, seed, 0);
    RunningMoments m;
    for (std::uint64_t t = 0; t < args.trials; ++t) {
        const auto trial = source.next();
        m.add(static_cast<double>(trial.s1 * trial.s2));
    }

    Json report;
    report["command"] = "calibrate";
    report["config"] = {{"target_r", args.target_r}, {"tolerance", args.tolerance}, {"trials", args.trials},
                        {"seed", seed}};
    report["results"] = {{"rho", cal.rho},
                         {"achieved_r", cal.achieved_r},
                         {"residual", cal.residual},
                         {"iterations", cal.iterations},
                         {"empirical_r", m.mean()},
                         {"empirical_std_err", m.standard_error()}};
    return report;
}

struct ThresholdArgs {
    std::string angles = kDefaultAngles;
};

inline Json cmd_threshold(const ThresholdArgs& args) {
    const AngleSet angles = parse_angles(args.angles);
    Json results = threshold_json(angles);
    const auto up = violation_threshold(angles, ThresholdBranch::increasing);
    results["s_at_increasing_r"] =
        up ? Json(analytic_chsh(angles, CorrelationCoefficient(*up)).s_value) : Json(nullptr);

    Json report;
    report["command"] = "threshold";
    report["config"] = {{"angles", angles_json(angles)}};
    report["results"] = std::move(results);
    return report;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses argv, runs one command and writes its report to `out`. Diagnostics
/// go to `err`. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Classical Bell-test simulator with correlated telegraph-noise sources", "bellnoise"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    std::string format_name;
    bool no_timestamp = false;
    app.add_option("--seed", seed, "Base seed for all random streams")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (does not change results)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--format", format_name, "Output format: json, csv or human (default depends on command)")
        ->check(CLI::IsMember({"json", "csv", "human"}));
    app.add_flag("--no-timestamp", no_timestamp, "Omit the timestamp field");

    AnalyticArgs analytic;
    auto* analytic_cmd = app.add_subcommand("analytic", "Closed-form estimators, S and threshold");
    analytic_cmd->add_option("--angles", analytic.angles, "thetaA,thetaB,thetaC,thetaD in degrees")
        ->capture_default_str();
    analytic_cmd->add_option("-r,--corr", analytic.r, "Noise correlation r in [-1, 1]")->capture_default_str();

    SimulateArgs simulate;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo CHSH experiment");
    simulate_cmd->add_option("--angles", simulate.angles, "thetaA,thetaB,thetaC,thetaD in degrees")
        ->capture_default_str();
    simulate_cmd->add_option("-r,--corr", simulate.r, "Noise correlation r in [-1, 1]")->capture_default_str();
    simulate_cmd->add_option("--trials", simulate.trials, "Trials per detector pairing")->capture_default_str();
    simulate_cmd->add_option("--source", simulate.source, "Noise source: rtw or gaussian")
        ->capture_default_str()
        ->check(CLI::IsMember({"rtw", "gaussian"}));
    simulate_cmd->add_option("--rho", simulate.rho, "Latent Gaussian correlation (default: calibrate to r)");
    simulate_cmd->add_option("--calibration-tolerance", simulate.calibration_tolerance,
                             "Tolerance for automatic Gaussian calibration")
        ->capture_default_str();

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep-r", "Analytic and Monte Carlo S over a range of r");
    sweep_cmd->add_option("--angles", sweep.angles, "thetaA,thetaB,thetaC,thetaD in degrees")->capture_default_str();
    sweep_cmd->add_option("--r-from", sweep.r_from)->capture_default_str();
    sweep_cmd->add_option("--r-to", sweep.r_to)->capture_default_str();
    sweep_cmd->add_option("--r-step", sweep.r_step)->capture_default_str();
    sweep_cmd->add_option("--trials", sweep.trials, "Trials per detector pairing per row")->capture_default_str();
    sweep_cmd->add_flag("--optimized-angles", sweep.optimized_angles,
                        "Use S-maximizing angle sets matched to the sign of r");

    OptimizeArgs optimize;
    auto* optimize_cmd = app.add_subcommand("optimize", "Search detector angles for maximal S");
    optimize_cmd->add_option("-r,--corr", optimize.r, "Noise correlation r in [-1, 1]")->capture_default_str();
    optimize_cmd->add_option("--grid-step", optimize.grid_step, "Lattice step in degrees")->capture_default_str();
    optimize_cmd->add_option("--tolerance", optimize.tolerance, "Minimum S gain per refine move")
        ->capture_default_str();
    optimize_cmd->add_flag("--trace", optimize.trace, "Include improvement traces");

    CalibrateArgs calibrate;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate a Gaussian sign source to a target r");
    calibrate_cmd->add_option("--target-r", calibrate.target_r)->capture_default_str();
    calibrate_cmd->add_option("--tolerance", calibrate.tolerance)->capture_default_str();
    calibrate_cmd->add_option("--trials", calibrate.trials, "Draws for the empirical check")->capture_default_str();

    ThresholdArgs threshold;
    auto* threshold_cmd = app.add_subcommand("threshold", "Correlation at which S crosses 2");
    threshold_cmd->add_option("--angles", threshold.angles, "thetaA,thetaB,thetaC,thetaD in degrees")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        Json report;
        Format format = Format::human;
        if (*analytic_cmd) {
            report = cmd_analytic(analytic);
        } else if (*simulate_cmd) {
            report = cmd_simulate(simulate, seed, threads);
            format = Format::json;
        } else if (*sweep_cmd) {
            report = cmd_sweep_r(sweep, seed, threads);
            format = Format::csv;
        } else if (*optimize_cmd) {
            report = cmd_optimize(optimize, threads);
        } else if (*calibrate_cmd) {
            report = cmd_calibrate(calibrate, seed);
        } else {
            report = cmd_threshold(threshold);
        }
        if (format_name == "json") format = Format::json;
        if (format_name == "csv") format = Format::csv;
        if (format_name == "human") format = Format::human;

        if (!no_timestamp) {
            // keep timestamp after config so field order stays fixed
            Json ordered;
            ordered["command"] = report["command"];
            ordered["config"] = report["config"];
            ordered["timestamp"] = utc_timestamp();
            ordered["results"] = report["results"];
            report = std::move(ordered);
        }
        render(report, format, out);
        return kExitOk;
    } catch (const CalibrationFailure& e) {
        err << "error: " << e.what() << "; best rho " << shortest(e.best_rho()) << " (residual "
            << shortest(e.best_residual()) << ")\n";
        return kExitNumerical;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const InsufficientData& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}

} // namespace bellnoise::cli
