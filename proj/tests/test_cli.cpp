#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "pm25/cli.hpp"

using namespace pm25;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("pm25_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    cli::RunConfig config(const std::string& command) const {
        cli::RunConfig c;
        c.command = command;
        c.out_dir = dir.string();
        return c;
    }
    std::string write(const std::string& name, const std::string& text) const {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    }
    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    static pm25::json read_json(const fs::path& p) { return pm25::json::parse(slurp(p)); }

    fs::path dir;
    std::ostringstream log;
};

const std::string a1 = oracle::data_path("appendix_a1.csv");

}  // namespace

TEST_F(Cli, Sha256KnownDigests) {
    EXPECT_EQ(cli::sha256_file(write("empty", "")),
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(cli::sha256_file(write("abc", "abc")),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(Cli, FitWritesReportsWithProvenance) {
    auto c = config("fit");
    c.obs = a1;
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    for (const char* f : {"fit_trace.csv", "residuals.csv", "fit_report.json", "coefficients.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto report = read_json(dir / "fit_report.json");
    EXPECT_EQ(report["inputs"][0]["sha256"], cli::sha256_file(a1));
    EXPECT_EQ(report["config"]["family"], "with-id");
    EXPECT_TRUE(report["fit"]["converged"].get<bool>());
    EXPECT_EQ(report["frame"]["rows"], 31);
    const auto coef = frozen_model_from_json(read_json(dir / "coefficients.json"));
    std::vector<double> theta;
    for (const auto& name : report["fit"]["parameters"]) theta.push_back(report["fit"]["theta_hat"][name.get<std::string>()]);
    EXPECT_EQ(coef, FrozenModel::from_lpm_scale(theta));
}

TEST_F(Cli, FitExitCodes) {
    auto c = config("fit");
    c.obs = (dir / "missing.csv").string();
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    c.obs = a1;
    c.max_steps = 1;
    EXPECT_EQ(cli::run(c, log), cli::not_converged);
    c.max_steps = 50;
    c.alpha = 1.5;
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    c.alpha = 0.05;
    c.family = "cubic";
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    c.family = "with-id";
    c.start = {1, 2};
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    c.command = "frobnicate";
    c.start.clear();
    EXPECT_EQ(cli::run(c, log), cli::input_error);
}

TEST_F(Cli, SimulateDeterministicUnderSeed) {
    auto c = config("simulate");
    c.obs = a1;
    c.reps = 12;
    c.size = 24;
    c.seed = 9;
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    const auto first = slurp(dir / "replications.csv");
    c.workers = 2;
    ASSERT_EQ(cli::run(c, log), cli::ok);
    EXPECT_EQ(slurp(dir / "replications.csv"), first);
    EXPECT_EQ(first.rfind("rep,converged,steps,", 0), 0u);
    const auto report = read_json(dir / "simulate_report.json");
    EXPECT_EQ(report["summary"]["replications"], 12);
}

TEST_F(Cli, SimulateSizeTooLarge) {
    auto c = config("simulate");
    c.obs = a1;
    c.reps = 3;
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    EXPECT_NE(log.str().find("exceeds"), std::string::npos);
}

TEST_F(Cli, ForecastFromObservations) {
    auto c = config("forecast");
    c.obs = a1;
    c.output = (dir / "fc.csv").string();
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    std::ifstream in(c.output);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(header, "date,pm_hat,id_source,arm,lo,hi,flags");
    EXPECT_EQ(first.rfind("2014-01-01,", 0), 0u);
    EXPECT_NE(first.find("algo2-fallback"), std::string::npos);
    std::string second;
    std::getline(in, second);
    EXPECT_NE(second.find(",algo1,"), std::string::npos);
    const auto meta = read_json(c.output + ".meta.json");
    EXPECT_EQ(meta["profile"]["name"], "standard-i1");
    EXPECT_EQ(meta["rows"], 31);
}

TEST_F(Cli, ForecastFromNcep) {
    auto c = config("forecast");
    c.obs = oracle::data_path("appendix_a2_obs.csv");
    c.ncep = oracle::data_path("appendix_a2_ncep.csv");
    c.id_algo = "2";
    c.output = (dir / "fc.csv").string();
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    std::ifstream in(c.output);
    const auto rows = cli::parse_forecast_csv(in);
    ASSERT_FALSE(rows.empty());
    for (const auto& r : rows) EXPECT_EQ(r.id_source, "algo2");
    const auto meta = read_json(c.output + ".meta.json");
    EXPECT_EQ(meta["profile"]["name"], "ncep-i1");
    EXPECT_EQ(meta["rows"].get<std::size_t>() + meta["skipped"].size(), 31u);
}

TEST_F(Cli, ValidateBandCentersCoverEverything) {
    // Band [pm - 20, pm + 30] for standard-i1; observation at the forecast itself is inside every preset.
    const auto fc = write("fc.csv",
                          "date,pm_hat,id_source,arm,lo,hi,flags\n"
                          "2014-01-01,100,algo1,band,80,130,\n"
                          "2014-01-02,120,algo1,band,100,150,\n"
                          "2014-01-03,20,algo2,low,0,35,\n");
    const auto obs = write("obs.csv",
                           "date,pm,t,tmax,tmin,pc,w,ep\n"
                           "2014-01-01,100,,,,,,\n"
                           "2014-01-02,120,,,,,,\n"
                           "2014-01-03,20,,,,,,\n");
    auto c = config("validate");
    c.forecast_in = fc;
    c.obs = obs;
    c.output = (dir / "report.json").string();
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    const auto report = read_json(c.output);
    for (const char* p : {"as_forecast", "standard-i1", "standard-i2", "ncep-i1", "ncep-i2"})
        EXPECT_EQ(report["profiles"][p]["rate"], 1.0) << p;
    EXPECT_EQ(report["by_id_source"]["algo2"]["as_forecast"]["total"], 1);
}

TEST_F(Cli, ValidateUnmatchedDates) {
    const auto fc = write("fc.csv", "date,pm_hat,id_source,arm,lo,hi,flags\n2014-03-01,100,algo1,band,80,130,\n");
    auto c = config("validate");
    c.forecast_in = fc;
    c.obs = a1;
    c.output = (dir / "report.json").string();
    EXPECT_EQ(cli::run(c, log), cli::input_error);
    EXPECT_NE(log.str().find("2014-03-01"), std::string::npos);
}

TEST_F(Cli, ResolveProfile) {
    EXPECT_EQ(cli::resolve_profile("ncep-i2").d_lo, 45.0);
    const auto p = cli::resolve_profile("standard:25");
    EXPECT_EQ(p.d_lo, 25.0);
    EXPECT_EQ(p.d_hi, 37.5);
    EXPECT_THROW(cli::resolve_profile("wide"), cli::ConfigError);
}

TEST_F(Cli, AggregateNcep) {
    auto c = config("aggregate-ncep");
    c.ncep = oracle::data_path("appendix_a2_ncep.csv");
    c.output = (dir / "daily.csv").string();
    ASSERT_EQ(cli::run(c, log), cli::ok) << log.str();
    std::ifstream in(c.output);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "date,t,tmax,tmin,trg,pc,w");
}
