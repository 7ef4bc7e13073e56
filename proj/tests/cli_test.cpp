/*
    Copyright (C) 2026 the apmon project

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#include "apm/cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "apm/common.hpp"

namespace {

namespace fs = std::filesystem;
using namespace apm;

const std::string kModel = std::string(APM_FIXTURE_DIR) + "/ehs.json";

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

CliRun run_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

long count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

// Every test gets an empty scratch directory that is removed afterwards.
class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               (std::string("apm_cli_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& leaf) const { return (dir_ / leaf).string(); }

    CliRun precalc() { return run_cli({"precalc", "--model", kModel, "--out", path("pa.json")}); }

    CliRun compile(const std::string& out_dir) {
        return run_cli({"compile", "--pa", path("pa.json"), "--model", kModel, "--out",
                        path(out_dir)});
    }

    CliRun simulate(const std::string& log_leaf, const std::vector<std::string>& extra = {}) {
        std::vector<std::string> args = {"simulate", "--model",   kModel,
                                         "--scenario", "UpdateVitalParameters",
                                         "--mode",     "burst",  "--jobs",
                                         "50",         "--inter-release", "0.1",
                                         "--service",  "deterministic", "--horizon",
                                         "1500",       "--out",   path(log_leaf)};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    }

    fs::path dir_;
};

using Pipeline = CliTest;
using Precalc = CliTest;
using Compile = CliTest;
using Monitor = CliTest;
using Simulate = CliTest;
using Report = CliTest;
using Args = CliTest;

TEST_F(Pipeline, EndToEndProducesArtifacts) {
    CliRun pre = precalc();
    ASSERT_EQ(pre.code, 0) << pre.err;
    EXPECT_EQ(pre.err, "");
    EXPECT_NE(pre.out.find("precalc: 5 candidate(s)"), std::string::npos) << pre.out;
    EXPECT_NE(pre.out.find("Blob(swC=AppServer)"), std::string::npos);
    ASSERT_TRUE(fs::exists(path("pa.json")));

    CliRun comp = compile("rules");
    ASSERT_EQ(comp.code, 0) << comp.err;
    EXPECT_NE(comp.out.find("compile: 8 rule(s)"), std::string::npos) << comp.out;
    ASSERT_TRUE(fs::exists(path("rules/rules.json")));
    EXPECT_TRUE(fs::exists(path("rules/TJ-UpdateVitalParameters.rule")));
    EXPECT_TRUE(fs::exists(path("rules/Blob-AppServer-LAN.rule")));
    EXPECT_TRUE(fs::exists(path("rules/MoreIsLess-PatientInfo.rule")));

    CliRun sim = simulate("sim.log");
    ASSERT_EQ(sim.code, 0) << sim.err;
    EXPECT_NE(sim.out.find("simulate: "), std::string::npos);
    EXPECT_NE(sim.out.find("50 completion(s)"), std::string::npos) << sim.out;
    ASSERT_TRUE(fs::exists(path("sim.log")));

    CliRun mon = run_cli({"monitor", "--rules", path("rules/rules.json"), "--pa",
                          path("pa.json"), "--replay", path("sim.log"), "--out", path("mon")});
    ASSERT_EQ(mon.code, 0) << mon.err;
    EXPECT_NE(mon.out.find("monitor: "), std::string::npos);
    EXPECT_NE(mon.out.find("Blob(swC=AppServer): "), std::string::npos) << mon.out;
    ASSERT_TRUE(fs::exists(path("mon/verdicts.log")));
    ASSERT_TRUE(fs::exists(path("mon/report.json")));
    const std::string report_json = read_file(path("mon/report.json"));
    EXPECT_NE(report_json.find("\"counters\""), std::string::npos);
    EXPECT_NE(report_json.find("\"windows\""), std::string::npos);

    CliRun rep = run_cli(
        {"report", "--verdicts", path("mon/verdicts.log"), "--out", path("series.csv")});
    ASSERT_EQ(rep.code, 0) << rep.err;
    EXPECT_NE(rep.out.find("report: 30 window row(s)"), std::string::npos) << rep.out;
    const std::string csv = read_file(path("series.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "window_start_s,window_end_s,avg_rt_s,utilization_AppHost,utilization_DbHost,"
              "utilization_LAN,utilization_PDA,throughput_per_s");
    EXPECT_EQ(count_lines(csv), 31);  // header + one row per 50 s window of [0,1500)
    // all scenario activity finishes inside the first window
    EXPECT_NE(csv.find("\n0,50,"), std::string::npos);
}

TEST_F(Monitor, PerRuleConsumersWhenNoCandidateFile) {
    ASSERT_EQ(precalc().code, 0);
    ASSERT_EQ(compile("rules").code, 0);
    ASSERT_EQ(simulate("sim.log").code, 0);

    CliRun mon = run_cli({"monitor", "--rules", path("rules/rules.json"), "--replay",
                          path("sim.log"), "--out", path("mon")});
    ASSERT_EQ(mon.code, 0) << mon.err;
    EXPECT_NE(mon.out.find("(rule=TJ-UpdateVitalParameters)"), std::string::npos) << mon.out;
    EXPECT_TRUE(fs::exists(path("mon/verdicts.log")));
}

TEST_F(Monitor, EmptyRuleFileFails) {
    write_file(path("rules.json"), "{\"rules\": []}\n");
    write_file(path("empty.log"), "");
    CliRun mon = run_cli({"monitor", "--rules", path("rules.json"), "--replay",
                          path("empty.log"), "--out", path("mon")});
    EXPECT_EQ(mon.code, 1);
    EXPECT_EQ(mon.err.rfind("error: ", 0), 0u) << mon.err;
    EXPECT_NE(mon.err.find("no rules"), std::string::npos) << mon.err;
}

TEST_F(Compile, RepeatedRunsAreByteIdentical) {
    ASSERT_EQ(precalc().code, 0);
    ASSERT_EQ(compile("one").code, 0);
    ASSERT_EQ(compile("two").code, 0);
    EXPECT_EQ(read_file(path("one/rules.json")), read_file(path("two/rules.json")));
    EXPECT_EQ(read_file(path("one/TJ-UpdateVitalParameters.rule")),
              read_file(path("two/TJ-UpdateVitalParameters.rule")));
}

TEST_F(Compile, MissingThresholdFieldNamesParameter) {
    ASSERT_EQ(precalc().code, 0);
    // th_maxParallelism left out; slot values are in the model's source unit
    write_file(path("thresholds.json"),
               "{\"th_maxConnects\": 4, \"th_maxMsgs\": 5, \"th_maxHwUtil\": 0.8,\n"
               " \"th_maxNetUtil\": 0.7, \"th_initSlot\": 0, \"th_sizeSlot\": 50000,\n"
               " \"th_endSlot\": 1500000, \"th_OpRtVar\": 300, \"th_minHwUtil\": 0.2}\n");
    CliRun comp = run_cli({"compile", "--pa", path("pa.json"), "--model", kModel,
                           "--thresholds", path("thresholds.json"), "--out", path("rules")});
    EXPECT_EQ(comp.code, 1);
    EXPECT_EQ(comp.err.rfind("error: ", 0), 0u) << comp.err;
    EXPECT_NE(comp.err.find("$Th_maxParallelism"), std::string::npos) << comp.err;
    EXPECT_EQ(count_lines(comp.err), 1);
    EXPECT_EQ(comp.out, "");
}

TEST_F(Precalc, MalformedModelReportsParseError) {
    write_file(path("bad.json"), "{ this is not json\n");
    CliRun pre = run_cli({"precalc", "--model", path("bad.json"), "--out", path("pa.json")});
    EXPECT_EQ(pre.code, 1);
    EXPECT_EQ(pre.err.rfind("error: ", 0), 0u) << pre.err;
    EXPECT_NE(pre.err.find("parse error"), std::string::npos) << pre.err;
    EXPECT_EQ(count_lines(pre.err), 1);
    EXPECT_FALSE(fs::exists(path("pa.json")));
}

TEST_F(Precalc, MissingModelFileReportsError) {
    CliRun pre = run_cli({"precalc", "--model", path("nope.json"), "--out", path("pa.json")});
    EXPECT_EQ(pre.code, 1);
    EXPECT_NE(pre.err.find("cannot open"), std::string::npos) << pre.err;
}

TEST_F(Report, WindowSeriesMergesPrevValues) {
    write_file(
        path("verdicts.log"),
        "# plan\trule=TJ-S\tinit=0\tsize=50\tend=1500\n"
        "rule=TJ-S\tinstance=TJ\twindow=6:[300,350)\tprev=5:[250,300)\tavg_rt_prev=0.4\t"
        "avg_rt=0.81\tslope=0.41\tthreshold=0.3\tviolated=true\tfired=false\n"
        "rule=TJ-S\tinstance=TJ\twindow=7:[350,400)\tprev=6:[300,350)\tavg_rt_prev=0.81\t"
        "avg_rt=1.27\tslope=0.46\tthreshold=0.3\tviolated=true\tfired=true\n");
    CliRun rep =
        run_cli({"report", "--verdicts", path("verdicts.log"), "--out", path("series.csv")});
    ASSERT_EQ(rep.code, 0) << rep.err;
    const std::string csv = read_file(path("series.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "window_start_s,window_end_s,avg_rt_s,throughput_per_s");
    EXPECT_EQ(count_lines(csv), 31);
    EXPECT_NE(csv.find("\n250,300,0.4,\n"), std::string::npos) << csv;  // via avg_rt_prev
    EXPECT_NE(csv.find("\n300,350,0.81,\n"), std::string::npos);
    EXPECT_NE(csv.find("\n350,400,1.27,\n"), std::string::npos);
    EXPECT_NE(csv.find("\n0,50,,\n"), std::string::npos);  // window nothing reported on
}

TEST_F(Report, EmptyLogGivesHeaderOnly) {
    write_file(path("verdicts.log"), "");
    CliRun rep =
        run_cli({"report", "--verdicts", path("verdicts.log"), "--out", path("series.csv")});
    ASSERT_EQ(rep.code, 0) << rep.err;
    EXPECT_NE(rep.out.find("report: 0 window row(s)"), std::string::npos) << rep.out;
    EXPECT_EQ(read_file(path("series.csv")),
              "window_start_s,window_end_s,avg_rt_s,throughput_per_s\n");
}

TEST_F(Simulate, SameSeedSameLogDifferentSeedDiffers) {
    std::vector<std::string> base = {"simulate", "--model", kModel, "--scenario",
                                     "UpdateVitalParameters", "--mode", "burst", "--jobs",
                                     "30", "--horizon", "300"};
    auto with = [&](const std::string& seed, const std::string& leaf) {
        std::vector<std::string> args = base;
        args.insert(args.end(), {"--seed", seed, "--out", path(leaf)});
        return run_cli(args);
    };
    ASSERT_EQ(with("7", "a.log").code, 0);
    ASSERT_EQ(with("7", "b.log").code, 0);
    ASSERT_EQ(with("8", "c.log").code, 0);
    const std::string a = read_file(path("a.log"));
    EXPECT_EQ(a, read_file(path("b.log")));
    EXPECT_NE(a, read_file(path("c.log")));
}

TEST_F(Simulate, SolvePrintsAnalyticSummary) {
    CliRun sim = simulate("sim.log", {"--solve"});
    ASSERT_EQ(sim.code, 0) << sim.err;
    EXPECT_NE(sim.out.find("network UpdateVitalParameters: population 10000"),
              std::string::npos)
        << sim.out;
    EXPECT_NE(sim.out.find("disk-DbHost"), std::string::npos);
    EXPECT_NE(sim.out.find("system\tresponse_time_s=0.73"), std::string::npos) << sim.out;
    EXPECT_NE(sim.out.find("mean_rt "), std::string::npos) << sim.out;
}

TEST_F(Simulate, UnknownRefactorTargetFails) {
    CliRun sim = simulate("sim.log", {"--refactor", "NoSuchHost", "--factor", "0.5"});
    EXPECT_EQ(sim.code, 1);
    EXPECT_EQ(sim.err.rfind("error: ", 0), 0u) << sim.err;
    EXPECT_NE(sim.err.find("NoSuchHost"), std::string::npos) << sim.err;
}

TEST_F(Simulate, BadModeRejected) {
    CliRun sim = run_cli({"simulate", "--model", kModel, "--scenario", "UpdateVitalParameters",
                          "--mode", "warmup", "--horizon", "10", "--out", path("sim.log")});
    EXPECT_EQ(sim.code, 1);
    EXPECT_EQ(sim.err.rfind("error: ", 0), 0u) << sim.err;
}

TEST_F(Args, UnknownSubcommandFails) {
    CliRun r = run_cli({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
    EXPECT_EQ(count_lines(r.err), 1);
}

TEST_F(Args, MissingRequiredOptionFails) {
    CliRun r = run_cli({"precalc", "--model", kModel});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--out"), std::string::npos) << r.err;
}

TEST_F(Args, HelpPrintsSubcommands) {
    CliRun r = run_cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.err, "");
    for (const char* name : {"precalc", "compile", "monitor", "simulate", "report"})
        EXPECT_NE(r.out.find(name), std::string::npos) << name;
}

}  // namespace
