#include "cli.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using bellnoise::cli::Json;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "bellnoise");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = bellnoise::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

Json run_json(std::vector<std::string> args) {
    args.push_back("--format");
    args.push_back("json");
    args.push_back("--no-timestamp");
    const auto res = run_cli(args);
    EXPECT_EQ(res.code, 0) << res.err;
    return Json::parse(res.out);
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

constexpr double sqrt2 = std::numbers::sqrt2;

} // namespace

TEST(ParseAngles, Accepts) {
    const auto set = bellnoise::cli::parse_angles("0, 22.5,45,+67.5");
    EXPECT_EQ(set, bellnoise::AngleSet::standard());
    EXPECT_EQ(bellnoise::cli::parse_angles("-10,0,0,0").a.deg(), 350.0);
}

TEST(ParseAngles, Rejects) {
    for (const char* bad : {"", "0,1,2", "0,1,2,3,4", "0,a,2,3", "0,,2,3", "0,1,2,inf", "0,1,2,3x"}) {
        EXPECT_THROW(bellnoise::cli::parse_angles(bad), bellnoise::InvalidParameter) << bad;
    }
}

// =============================================================================
// analytic
// =============================================================================

TEST(CliAnalytic, ViolationAtPointEight) {
    const auto j = run_json({"analytic", "-r", "0.8"});
    EXPECT_NEAR(j["results"]["s_value"].get<double>(), 2.21421, 5e-6);
    EXPECT_TRUE(j["results"]["violated"].get<bool>());
    EXPECT_NEAR(j["results"]["threshold"]["increasing_r"].get<double>(), 2 - sqrt2, 1e-10);
    EXPECT_EQ(j["results"]["threshold"]["published_standard_angles"].get<double>(), 0.656);
    EXPECT_EQ(j["results"]["classical_bound"].get<double>(), 2.0);
    EXPECT_NEAR(j["results"]["quantum_reference"].get<double>(), 2.828, 5e-4);
}

TEST(CliAnalytic, NoViolationUncorrelated) {
    const auto j = run_json({"analytic", "-r", "0"});
    EXPECT_NEAR(j["results"]["s_value"].get<double>(), 1.41421, 5e-6);
    EXPECT_FALSE(j["results"]["violated"].get<bool>());
}

TEST(CliAnalytic, EchoesDefaults) {
    const auto j = run_json({"analytic"});
    EXPECT_EQ(j["config"]["r"].get<double>(), 0.8);
    EXPECT_EQ(j["config"]["angles"], Json::parse("[0.0, 22.5, 45.0, 67.5]"));
}

TEST(CliAnalytic, NegativeRValueParses) {
    const auto j = run_json({"analytic", "-r", "-0.8", "--angles", "0,22.5,135,67.5"});
    EXPECT_NEAR(j["results"]["s_value"].get<double>(), sqrt2 + 0.8, 1e-12);
}

TEST(CliAnalytic, OutOfRangeIsExitTwo) {
    const auto res = run_cli({"analytic", "-r", "1.5"});
    EXPECT_EQ(res.code, 2);
    EXPECT_NE(res.err.find("[-1, 1]"), std::string::npos);
    EXPECT_EQ(run_cli({"analytic", "--angles", "0,1"}).code, 2);
    EXPECT_EQ(run_cli({"analytic", "--bogus"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"analytic", "--format", "xml"}).code, 2);
}

TEST(CliAnalytic, HumanFormatUsesSixDigits) {
    const auto res = run_cli({"analytic", "-r", "0.8", "--no-timestamp"});
    ASSERT_EQ(res.code, 0);
    EXPECT_NE(res.out.find("s_value: 2.21421\n"), std::string::npos) << res.out;
    EXPECT_EQ(res.out.find("timestamp"), std::string::npos);
}

TEST(CliAnalytic, TimestampPresentByDefault) {
    const auto res = run_cli({"analytic", "--format", "json"});
    ASSERT_EQ(res.code, 0);
    EXPECT_TRUE(Json::parse(res.out).contains("timestamp"));
}

TEST(CliHelp, ExitsZero) { EXPECT_EQ(run_cli({"--help"}).code, 0); }

// =============================================================================
// simulate
// =============================================================================

TEST(CliSimulate, PerfectCorrelation) {
    const auto j = run_json({"simulate", "-r", "1", "--trials", "100000", "--seed", "7"});
    const double s = j["results"]["s_mc"].get<double>();
    const double se = j["results"]["std_err"].get<double>();
    EXPECT_NEAR(s, 2.41421, 5 * se + 5e-6);
    EXPECT_EQ(j["config"]["seed"].get<std::uint64_t>(), 7u);
    EXPECT_EQ(j["config"]["trials"].get<std::uint64_t>(), 100000u);
    ASSERT_EQ(j["results"]["pairs"].size(), 4u);
    EXPECT_EQ(j["results"]["pairs"][0]["pair"], "AB");
    EXPECT_EQ(j["results"]["pairs"][0]["counts"]["VH"].get<std::uint64_t>(), 0u);
}

TEST(CliSimulate, TooFewTrialsIsExitTwo) {
    EXPECT_EQ(run_cli({"simulate", "--trials", "1"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--trials", "-5"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--source", "pink"}).code, 2);
}

TEST(CliSimulate, ByteIdenticalAcrossRunsAndThreads) {
    const std::vector<std::string> base{"simulate", "-r", "0.6", "--trials", "150000", "--seed", "99",
                                        "--no-timestamp"};
    auto with_threads = [&](const char* t) {
        auto args = base;
        args.push_back("--threads");
        args.push_back(t);
        return run_cli(args);
    };
    const auto a = with_threads("1");
    const auto b = with_threads("1");
    const auto c = with_threads("3");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out, c.out);
}

TEST(CliSimulate, SeedChangesResult) {
    const auto a = run_json({"simulate", "--trials", "1000", "--seed", "1"});
    const auto b = run_json({"simulate", "--trials", "1000", "--seed", "2"});
    EXPECT_NE(a["results"]["s_mc"], b["results"]["s_mc"]);
}

TEST(CliSimulate, GaussianSourceAutoCalibrates) {
    const auto j = run_json({"simulate", "--source", "gaussian", "-r", "0.7", "--trials", "200000"});
    EXPECT_EQ(j["config"]["rho"], "auto");
    EXPECT_NEAR(j["results"]["rho"].get<double>(), std::sin(0.7 * std::numbers::pi / 2), 1e-5);
    EXPECT_NEAR(j["results"]["s_mc"].get<double>(), sqrt2 + 0.7, 5 * j["results"]["std_err"].get<double>());
}

TEST(CliSimulate, GaussianSourceExplicitRho) {
    const auto j = run_json({"simulate", "--source", "gaussian", "--rho", "0", "-r", "0", "--trials", "1000"});
    EXPECT_EQ(j["config"]["rho"].get<double>(), 0.0);
    EXPECT_EQ(j["results"]["effective_r"].get<double>(), 0.0);
    EXPECT_EQ(run_cli({"simulate", "--source", "gaussian", "--rho", "2"}).code, 2);
}

// =============================================================================
// sweep-r
// =============================================================================

TEST(CliSweep, CsvColumnsAndAnalyticColumn) {
    const auto res = run_cli({"sweep-r", "--trials", "1000", "--no-timestamp"});
    ASSERT_EQ(res.code, 0) << res.err;
    std::vector<std::string> data;
    for (const auto& l : lines(res.out)) {
        if (!l.empty() && l[0] != '#') data.push_back(l);
    }
    ASSERT_EQ(data.size(), 12u);
    EXPECT_EQ(data[0], "r,s_analytic,s_mc,std_err,violated_analytic,violated_mc");
    for (std::size_t k = 1; k < data.size(); ++k) {
        std::istringstream row(data[k]);
        std::string r_text, s_text;
        std::getline(row, r_text, ',');
        std::getline(row, s_text, ',');
        EXPECT_NEAR(std::stod(s_text), 1.41421 + std::stod(r_text), 1e-5);
    }
    EXPECT_EQ(data[4].substr(0, 4), "0.3,");
    EXPECT_EQ(res.out.find('\r'), std::string::npos);
}

TEST(CliSweep, InvalidRange) {
    EXPECT_EQ(run_cli({"sweep-r", "--r-from", "0.5", "--r-to", "0.1"}).code, 2);
    EXPECT_EQ(run_cli({"sweep-r", "--r-step", "0"}).code, 2);
    EXPECT_EQ(run_cli({"sweep-r", "--r-to", "1.2"}).code, 2);
}

TEST(CliSweep, OptimizedAnglesGiveSymmetricViolationRegion) {
    const auto j = run_json({"sweep-r", "--r-from", "-1", "--r-to", "1", "--r-step", "0.05", "--trials", "200",
                             "--optimized-angles"});
    const auto& rows = j["results"]["rows"];
    ASSERT_EQ(rows.size(), 41u);
    for (const auto& row : rows) {
        const double r = row["r"].get<double>();
        EXPECT_NEAR(row["s_analytic"].get<double>(), sqrt2 + std::abs(r), 1e-12) << r;
        EXPECT_EQ(row["violated_analytic"].get<bool>(), std::abs(r) > 2 - sqrt2) << r;
    }
}

// =============================================================================
// optimize, calibrate, threshold
// =============================================================================

TEST(CliOptimize, ReachesBound) {
    for (const char* r : {"0.9", "0"}) {
        const auto j = run_json({"optimize", "-r", r, "--grid-step", "7.5"});
        EXPECT_NEAR(j["results"]["best_s"].get<double>(), sqrt2 + std::stod(r), 1e-3) << r;
    }
}

TEST(CliOptimize, TraceAndInvalidStep) {
    const auto j = run_json({"optimize", "-r", "0.2", "--grid-step", "30", "--trace"});
    EXPECT_FALSE(j["results"]["trace"]["grid"].empty());
    EXPECT_EQ(run_cli({"optimize", "--grid-step", "0"}).code, 2);
    EXPECT_EQ(run_cli({"optimize", "--tolerance", "-1"}).code, 2);
}

TEST(CliCalibrate, Examples) {
    const auto zero = run_json({"calibrate", "--target-r", "0", "--trials", "1000"});
    EXPECT_EQ(zero["results"]["rho"].get<double>(), 0.0);

    const auto half = run_json({"calibrate", "--target-r", "0.5", "--trials", "1000000"});
    EXPECT_NEAR(half["results"]["achieved_r"].get<double>(), 0.5, 1e-3);
    EXPECT_NEAR(half["results"]["empirical_r"].get<double>(), 0.5,
                5 * half["results"]["empirical_std_err"].get<double>() + 1e-3);

    EXPECT_EQ(run_cli({"calibrate", "--target-r", "-2"}).code, 2);
}

TEST(CliCalibrate, FailureIsExitThreeWithBestRho) {
    const auto res = run_cli({"calibrate", "--target-r", "0.5", "--tolerance", "1e-30"});
    EXPECT_EQ(res.code, 3);
    EXPECT_NE(res.err.find("best rho 0.70710678"), std::string::npos) << res.err;
}

TEST(CliThreshold, StandardAnglesAndAbsentBranch) {
    const auto j = run_json({"threshold"});
    EXPECT_NEAR(j["results"]["increasing_r"].get<double>(), 0.5857864376269049, 1e-10);
    EXPECT_NEAR(j["results"]["s_at_increasing_r"].get<double>(), 2.0, 1e-10);
    EXPECT_NE(j["results"]["note"].get<std::string>().find("0.656"), std::string::npos);

    const auto absent = run_json({"threshold", "--angles", "0,0,90,0"});
    EXPECT_TRUE(absent["results"]["increasing_r"].is_null());
}

TEST(CliThreshold, CsvSingleRow) {
    const auto res = run_cli({"threshold", "--format", "csv", "--no-timestamp"});
    ASSERT_EQ(res.code, 0);
    std::vector<std::string> data;
    for (const auto& l : lines(res.out)) {
        if (!l.empty() && l[0] != '#') data.push_back(l);
    }
    ASSERT_EQ(data.size(), 2u);
    EXPECT_EQ(data[0].substr(0, 25), "increasing_r,decreasing_r");
}
