#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "mcd/io/dataset.hpp"
#include "mcd/io/model_io.hpp"
#include "mcd/io/report.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int code;
    std::string out;
};

RunResult run_capture(const std::string& dir, const std::string& args, const std::string& env = "") {
    const std::string capture = dir + "/stdout.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" MCD_CLI_PATH "\" " + args + " >\"" + capture + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_file(capture)};
}

const std::string kSmall = " --scene.n_points 80 --train.layer_dims 4,8,1";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = testutil::scratch_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    }
    std::string p(const std::string& name) const { return dir + "/" + name; }
    std::string dir;
};

TEST_F(Cli, SynthIsByteIdenticalAcrossRuns) {
    ASSERT_EQ(testutil::run_cli("synth --out " + p("a.jsonl") + " --scenes 4" + kSmall), 0);
    ASSERT_EQ(testutil::run_cli("synth --out " + p("b.jsonl") + " --scenes 4" + kSmall, "MCD_THREADS=3"), 0);
    EXPECT_EQ(testutil::read_file(p("a.jsonl")), testutil::read_file(p("b.jsonl")));
    ASSERT_EQ(testutil::run_cli("synth --out " + p("c.jsonl") + " --scenes 4 --scene.seed 2" + kSmall), 0);
    EXPECT_NE(testutil::read_file(p("a.jsonl")), testutil::read_file(p("c.jsonl")));
}

TEST_F(Cli, ConfigFileAndOverridePrecedence) {
    testutil::write_file(p("run.conf"), "[scene]\nn_scenes = 2\nn_points = 40\n[style]\nname = style-H\n");
    ASSERT_EQ(testutil::run_cli("synth --config " + p("run.conf") + " --out " + p("a.jsonl") + " --style.density 30"), 0);
    const auto ds = mcd::io::read_dataset(p("a.jsonl"));
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.kind, mcd::io::DatasetKind::Styled);
    EXPECT_EQ(ds.records[0].matches.size(), 30u);
    // an alias overrides the file; a dotted override beats the alias
    ASSERT_EQ(testutil::run_cli("synth --config " + p("run.conf") + " --out " + p("b.jsonl") +
                                " --scenes 3 --scene.n_scenes=1 --style none"),
              0);
    const auto b = mcd::io::read_dataset(p("b.jsonl"));
    EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(b.kind, mcd::io::DatasetKind::Gt);
}

TEST_F(Cli, ExitCodes) {
    const std::string out = " --out " + p("x.jsonl");
    EXPECT_EQ(testutil::run_cli("synth" + out + " --scene.bogus 1"), 2);
    EXPECT_EQ(testutil::run_cli("synth" + out + " --style SIFT"), 2);
    EXPECT_EQ(testutil::run_cli("synth" + out + " --train.K 1"), 2);
    EXPECT_EQ(testutil::run_cli("synth" + out, "MCD_THREADS=abc"), 2);
    EXPECT_EQ(testutil::run_cli("frobnicate"), 2);
    EXPECT_EQ(testutil::run_cli(""), 2);
    ASSERT_EQ(testutil::run_cli("synth --scenes 2" + kSmall + out), 0);
    std::string text = testutil::read_file(p("x.jsonl"));
    const auto pos = text.find("\"matches\":[[") + 12;
    text[pos] = text[pos] == '1' ? '2' : '1';
    testutil::write_file(p("bad.jsonl"), text);
    EXPECT_EQ(testutil::run_cli("eval --data " + p("bad.jsonl") + " --out " + p("r.csv")), 3);
    testutil::write_file(p("junk.json"), "{\"format_version\":1}");
    EXPECT_EQ(testutil::run_cli("eval --data " + p("x.jsonl") + " --model " + p("junk.json") + " --out " + p("r.csv")), 3);
    // diffuse needs a ground-truth dataset as input
    ASSERT_EQ(testutil::run_cli("synth --scenes 2 --style style-H --style.density 50" + kSmall + " --out " + p("h.jsonl")), 0);
    EXPECT_EQ(testutil::run_cli("diffuse --in " + p("h.jsonl") + " --out " + p("d.jsonl")), 3);
    EXPECT_EQ(testutil::run_cli("synth --scenes 1" + kSmall + " --out " + p("no/such/dir/x.jsonl")), 3);
    // fewer scenes than one batch
    EXPECT_EQ(testutil::run_cli("train --data " + p("x.jsonl") + " --out " + p("m.json") + " --train.H 4"), 3);
}

TEST_F(Cli, GroundTruthEvalIsPerfect) {
    ASSERT_EQ(testutil::run_cli("synth --scenes 5" + kSmall + " --out " + p("gt.jsonl")), 0);
    const RunResult r = run_capture(dir, "eval --data " + p("gt.jsonl") + " --out " + p("r.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("AUC@5"), std::string::npos);
    const auto rep = mcd::io::read_report_csv(p("r.csv"));
    ASSERT_EQ(rep.rows.size(), 5u);
    for (const auto& row : rep.rows) EXPECT_LT(row.pose_err, 1e-4);
    const std::string text = testutil::read_file(p("r.csv"));
    EXPECT_NE(text.find("# auc@20 = 1.000000"), std::string::npos);
    EXPECT_NE(text.find("# failures = 0"), std::string::npos);
}

TEST_F(Cli, TooFewMatchesCountAsFailures) {
    ASSERT_EQ(testutil::run_cli("synth --scenes 3 --style.density 6 --scene.n_points 20 --out " + p("tiny.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("eval --data " + p("tiny.jsonl") + " --out " + p("r.csv")), 0);
    const std::string text = testutil::read_file(p("r.csv"));
    EXPECT_NE(text.find("# failures = 3"), std::string::npos);
    EXPECT_NE(text.find("# auc@5 = 0.000000"), std::string::npos);
    const auto rep = mcd::io::read_report_csv(p("r.csv"));
    for (const auto& row : rep.rows) EXPECT_EQ(row.pose_err, 180.0);
}

TEST_F(Cli, ZeroEpochTrainWritesTheInitialModel) {
    ASSERT_EQ(testutil::run_cli("synth --scenes 4" + kSmall + " --out " + p("gt.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("train --data " + p("gt.jsonl") + " --out " + p("m.json") + " --train.epochs 0" + kSmall), 0);
    const auto mf = mcd::io::read_model(p("m.json"));
    EXPECT_EQ(mf.model.flatten(), mcd::SamplerModel::initialize({4, 8, 1}, 42).flatten());
    EXPECT_TRUE(fs::exists(p("m_log.csv")));
}

TEST_F(Cli, TrainLogHasOneRowPerEpochAndEvalAcceptsTheModel) {
    ASSERT_EQ(testutil::run_cli("synth --scenes 4" + kSmall + " --out " + p("gt.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("diffuse --in " + p("gt.jsonl") + " --out " + p("d.jsonl")), 0);
    const std::string train = "train --data " + p("d.jsonl") + " --out " + p("m.json") + " --log " + p("log.csv") +
                              " --train.epochs 3 --train.K 4 --train.H 2" + kSmall;
    ASSERT_EQ(testutil::run_cli(train), 0);
    std::istringstream log(testutil::read_file(p("log.csv")));
    std::string line;
    int rows = -1;  // header
    while (std::getline(log, line)) rows += !line.empty() && line.front() != '#' ? 1 : 0;
    EXPECT_EQ(rows, 3);
    ASSERT_EQ(testutil::run_cli("eval --data " + p("d.jsonl") + " --model " + p("m.json") + " --out " + p("r.csv")), 0);
    // retraining reproduces the model byte for byte, whatever the thread count
    const std::string again = "train --data " + p("d.jsonl") + " --out " + p("m2.json") + " --log " + p("log2.csv") +
                              " --train.epochs 3 --train.K 4 --train.H 2" + kSmall;
    ASSERT_EQ(testutil::run_cli(again, "MCD_THREADS=2"), 0);
    EXPECT_EQ(testutil::read_file(p("m.json")), testutil::read_file(p("m2.json")));
    EXPECT_EQ(testutil::read_file(p("log.csv")), testutil::read_file(p("log2.csv")));
}

TEST_F(Cli, PlotHasOneCurveAndLegendEntryPerReport) {
    ASSERT_EQ(testutil::run_cli("synth --scenes 3 --style style-H --scene.n_points 600 --out " + p("h.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("synth --scenes 3 --scene.n_points 60 --out " + p("g.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("eval --data " + p("h.jsonl") + " --out " + p("rh.csv")), 0);
    ASSERT_EQ(testutil::run_cli("eval --data " + p("g.jsonl") + " --out " + p("rg.csv")), 0);
    ASSERT_EQ(testutil::run_cli("plot --report styled=" + p("rh.csv") + " --report " + p("rg.csv") + " --out " + p("c.svg")), 0);
    const std::string svg = testutil::read_file(p("c.svg"));
    EXPECT_EQ(testutil::xml_problem(svg), "");
    EXPECT_NE(svg.find("data-name=\"styled\""), std::string::npos);
    EXPECT_NE(svg.find("data-name=\"rg\""), std::string::npos);
    EXPECT_NE(svg.find(">styled</text>"), std::string::npos);
    EXPECT_NE(svg.find(">rg</text>"), std::string::npos);
    if (std::system("python3 -c 'import xml.dom.minidom' >/dev/null 2>&1") == 0) {
        const std::string check = "python3 -c 'import sys, xml.dom.minidom as m; m.parse(sys.argv[1])' \"" + p("c.svg") + "\"";
        EXPECT_EQ(std::system(check.c_str()), 0);
    }
    EXPECT_EQ(testutil::run_cli("plot --report " + p("missing.csv") + " --out " + p("x.svg")), 3);
}

TEST_F(Cli, CompareWritesTheTableAndArtifacts) {
    const std::string small = " --scene.n_points 300 --train.epochs 1 --train.K 2 --train.H 2 --train.layer_dims 4,4,1";
    ASSERT_EQ(testutil::run_cli("synth --scenes 2 --style style-H --style.density 200" + small + " --out " + p("h.jsonl")), 0);
    ASSERT_EQ(testutil::run_cli("synth --scenes 2" + small + " --scene.seed 9 --out " + p("gt.jsonl")), 0);
    const RunResult r = run_capture(dir, "compare --train H=" + p("h.jsonl") + " --train mcd=" + p("gt.jsonl") + " --test H=" +
                                       p("h.jsonl") + " --out-dir " + p("cmp") + small);
    ASSERT_EQ(r.code, 0) << r.out;
    for (const char* f : {"compare.csv", "table.txt", "model_H.json", "model_mcd.json", "log_H.csv", "curves_H.svg",
                          "report_uniform__H.csv", "report_mcd__H.csv"}) {
        EXPECT_TRUE(fs::exists(p("cmp/") + f)) << f;
    }
    EXPECT_EQ(testutil::xml_problem(testutil::read_file(p("cmp/curves_H.svg"))), "");
}

}  // namespace
