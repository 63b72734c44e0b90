#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "bayesctl/cli.hpp"
#include "test_support.hpp"

using namespace bayesctl;
using namespace bayesctl::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("bayesctl_cli_" + name); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BAYESCTL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

// Header and data rows of a report, provenance line dropped.
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') rows.push_back(split(line));
    return rows;
}

std::string cell(const std::vector<std::vector<std::string>>& t, std::size_t row, const std::string& col) {
    for (std::size_t j = 0; j < t[0].size(); ++j)
        if (t[0][j] == col) return t[row][j];
    return "<missing " + col + ">";
}

}  // namespace

TEST(Cli, ValidateSucceeds) {
    const fs::path out = scratch("validate.csv");
    ASSERT_EQ(run_cli("validate --scenario " + scenario_path("one_step_scalar.json") + " --out " + out.string()), 0);
    const auto t = read_csv(out);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(cell(t, 1, "m"), "1");
    EXPECT_EQ(cell(t, 1, "M"), "1");
}

TEST(Cli, CoeffsReportsGain) {
    const fs::path out = scratch("coeffs.csv");
    ASSERT_EQ(run_cli("coeffs --scenario " + scenario_path("one_step_scalar.json") + " --out " + out.string()), 0);
    const auto t = read_csv(out);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_DOUBLE_EQ(std::stod(cell(t, 1, "K_0_0")), 2.0);
    EXPECT_DOUBLE_EQ(std::stod(cell(t, 2, "A_0_0")), 1.0);
    EXPECT_EQ(slurp(out).rfind("# bayesctl coeffs mode=derived theta=default", 0), 0u);
}

TEST(Cli, CompareModesFlagsDiscrepancies) {
    const fs::path out = scratch("compare.csv");
    ASSERT_EQ(run_cli("compare-modes --beta 3 --out " + out.string()), 0);
    const auto t = read_csv(out);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_DOUBLE_EQ(std::stod(cell(t, 1, "Q_printed")), 0.375);
    EXPECT_DOUBLE_EQ(std::stod(cell(t, 1, "Q_derived")), 0.75);
    EXPECT_NEAR(std::stod(cell(t, 1, "Q_quadrature")), 0.75, 1e-12);
    EXPECT_EQ(cell(t, 1, "discrepancies"), "Q;Q3;Q4");
}

TEST(Cli, OracleCheckPassesInDerivedMode) {
    const fs::path out = scratch("oracle.csv");
    EXPECT_EQ(run_cli("oracle-check --scenario " + scenario_path("one_step_scalar.json") + " --out " + out.string()), 0);
    const auto t = read_csv(out);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_EQ(cell(t, i, "pass"), "1") << cell(t, i, "check");
}

TEST(Cli, OracleCheckFailsInPrintedMode) {
    EXPECT_EQ(run_cli("oracle-check --mode printed --beta 3 --out " + scratch("oracle_p.csv").string()), 3);
}

TEST(Cli, SimulateIsByteIdenticalAcrossRunsAndWorkers) {
    const std::string base = "simulate --scenario " + scenario_path("two_state_random_horizon.json") +
                             " --reps 2000 --seed 42";
    const fs::path a = scratch("sim_a.csv"), b = scratch("sim_b.csv"), c = scratch("sim_c.csv");
    ASSERT_EQ(run_cli(base + " --workers 1 --out " + a.string()), 0);
    ASSERT_EQ(run_cli(base + " --workers 1 --out " + b.string()), 0);
    ASSERT_EQ(run_cli(base + " --workers 4 --out " + c.string()), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a), slurp(c));
    const auto t = read_csv(a);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[1].size(), 4u);
    EXPECT_EQ(cell(t, 1, "seed"), "42");
}

TEST(Cli, SimulateWritesTrajectories) {
    const fs::path out = scratch("sim_t.csv"), traj = scratch("traj.csv");
    ASSERT_EQ(run_cli("simulate --scenario " + scenario_path("one_step_scalar.json") + " --reps 10 --out " +
                      out.string() + " --trajectories-out " + traj.string() + " --trajectories 3"),
              0);
    const auto t = read_csv(traj);
    EXPECT_EQ(t.size(), 1u + 3u * 2u);
    EXPECT_DOUBLE_EQ(std::stod(cell(t, 1, "u_0")), -0.375);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("nonsense"), 1);
    EXPECT_EQ(run_cli("validate"), 1);
    EXPECT_EQ(run_cli("simulate --scenario " + scenario_path("one_step_scalar.json") + " --reps 1"), 1);
    EXPECT_EQ(run_cli("validate --scenario /nonexistent/x.json"), 2);

    const fs::path bad = scratch("bad_beta.json");
    {
        auto j = scenario_to_json(one_step_scenario());
        j["prior"]["beta"] = {1.5};
        std::ofstream(bad) << j.dump();
    }
    EXPECT_EQ(run_cli("validate --scenario " + bad.string()), 2);
}

TEST(EmitReport, EmptyTableIsAnErrorAndWritesNothing) {
    const fs::path out = scratch("empty.csv");
    fs::remove(out);
    CsvTable t;
    t.header = {"a"};
    EXPECT_THROW(emit_report(t, out.string()), InvalidInput);
    EXPECT_FALSE(fs::exists(out));
}

TEST(EmitReport, RowWidthMustMatchHeader) {
    CsvTable t;
    t.header = {"a", "b"};
    t.add_row({"1"});
    EXPECT_THROW(emit_report(t, scratch("ragged.csv").string()), InvalidInput);
}

TEST(EmitReport, DoublesRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567})
        EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(RunExperiment, InProcessSimulateReport) {
    RunConfig cfg;
    cfg.command = "simulate";
    cfg.scenario_path = scenario_path("one_step_scalar.json");
    cfg.replications = 100;
    cfg.out = scratch("inproc.csv").string();
    ASSERT_EQ(run_experiment(cfg), kOk);
    const auto t = read_csv(cfg.out);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], (std::vector<std::string>{"mean_loss", "std_error", "replications", "seed"}));
    EXPECT_EQ(cell(t, 1, "replications"), "100");

    cfg.theta = -1.0;
    EXPECT_EQ(run_experiment(cfg), kUsage);
    cfg.theta.reset();
    cfg.command = "bogus";
    EXPECT_EQ(run_experiment(cfg), kUsage);
}
