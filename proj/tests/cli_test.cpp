#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "stwf/cli.hpp"
#include "testing.hpp"

namespace stwf {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> quick_train(const fs::path& out) {
    return {"train", "--n", "500", "--epochs", "5", "--batch-size", "32", "--seeds", "2", "--lambda1", "1",
            "--out", out.string()};
}

TEST(Cli, ReproduceExample) {
    const auto dir = testing::scratch_dir("cli_example");
    const Outcome r = run({"reproduce-example", "ex2", "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("x*=0.7999999999999999"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "example_ex2.json"));
}

TEST(Cli, UsageAndValidationErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"fly"}).code, 1);
    EXPECT_EQ(run({"train", "--no-such-flag"}).code, 1);
    EXPECT_EQ(run({"train", "--lambda1", "-1"}).code, 1);
    EXPECT_EQ(run({"train", "--algo", "svm"}).code, 1);
    EXPECT_EQ(run({"train", "--dataset", "csv"}).code, 1);
    EXPECT_EQ(run({"train", "--dataset", "csv", "--data", "/nonexistent.csv", "--schema", "/nonexistent.json"}).code, 1);
    EXPECT_EQ(run({"evaluate", "--policy", "/nonexistent.json"}).code, 1);
    EXPECT_EQ(run({"reproduce-example", "ex9"}).code, 1);
    EXPECT_EQ(run({"train", "--config", "/nonexistent.json"}).code, 1);
    const Outcome help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("sweep"), std::string::npos);
}

TEST(Cli, TrainWritesDeterministicOutputs) {
    const auto a = testing::scratch_dir("cli_train_a");
    const auto b = testing::scratch_dir("cli_train_b");
    auto args_a = quick_train(a);
    auto args_b = quick_train(b);
    args_a.insert(args_a.end(), {"--jobs", "1"});
    args_b.insert(args_b.end(), {"--jobs", "2"});
    const Outcome ra = run(args_a);
    const Outcome rb = run(args_b);
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    for (const char* name : {"results.csv", "summary.json", "policy_seed0.json", "policy_seed1.json",
                             "trace_seed0.csv", "trace_seed1.csv"}) {
        ASSERT_TRUE(fs::exists(a / name)) << name;
        // Output directories differ, and so does --jobs; neither is recorded.
        EXPECT_EQ(testing::read_file(a / name), testing::read_file(b / name)) << name;
    }
    const std::string csv = testing::read_file(a / "results.csv");
    EXPECT_EQ(csv.rfind("# config: {", 0), 0u);
    EXPECT_NE(csv.find("\nlambda1,lambda2,seed,dw,imp,sf,aw,swf,total,ei_gap,be_gap,dp_gap,eo_gap\n"),
              std::string::npos);
    EXPECT_NE(csv.find("\n1,0,0,"), std::string::npos);
    EXPECT_NE(csv.find("\n1,0,mean±std,"), std::string::npos);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
    const auto dir = testing::scratch_dir("cli_config");
    testing::write_file(dir / "cfg.json",
                        R"({"n": 400, "epochs": 3, "batch-size": 16, "lambda1": 2, "lambda2": 0.5, "seeds": 1})");
    const Outcome r = run({"train", "--config", (dir / "cfg.json").string(), "--lambda1", "0.25", "--out",
                       (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = testing::read_file(dir / "out" / "results.csv");
    EXPECT_NE(csv.find("\"lambda1\":0.25"), std::string::npos);
    EXPECT_NE(csv.find("\"lambda2\":0.5"), std::string::npos);
    EXPECT_NE(csv.find("\"n\":400"), std::string::npos);
}

TEST(Cli, OutputRootPrefixesRelativePaths) {
    const auto root = testing::scratch_dir("cli_root");
    setenv("STWF_OUTPUT_ROOT", root.c_str(), 1);
    const Outcome r = run({"reproduce-example", "ex1", "--out", "nested"});
    unsetenv("STWF_OUTPUT_ROOT");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(root / "nested" / "example_ex1.json"));
}

TEST(Cli, SweepRowsAreOrderedByValueThenSeed) {
    const auto dir = testing::scratch_dir("cli_sweep");
    const Outcome r = run({"sweep", "--axis", "lambda2", "--values", "0,1", "--n", "400", "--epochs", "3",
                       "--batch-size", "16", "--seeds", "2", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(testing::read_file(dir / "sweep.csv"));
    std::string line;
    std::vector<std::string> prefixes;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'l') continue;
        const auto third = line.find(',', line.find(',') + 1);
        prefixes.push_back(line.substr(0, line.find(',', third + 1)));
    }
    const std::vector<std::string> expected = {"0,0,0", "0,0,1", "0,1,0", "0,1,1", "0,0,mean±std", "0,1,mean±std"};
    EXPECT_EQ(prefixes, expected);
    EXPECT_EQ(run({"sweep", "--axis", "lambda3"}).code, 1);
    EXPECT_EQ(run({"sweep", "--values", "0,x"}).code, 1);
}

TEST(Cli, EvaluateAndAuditSavedPolicy) {
    const auto dir = testing::scratch_dir("cli_eval");
    ASSERT_EQ(run(quick_train(dir)).code, 0);
    const std::string policy = (dir / "policy_seed0.json").string();
    const Outcome e = run({"evaluate", "--policy", policy, "--n", "500", "--out", (dir / "eval").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_TRUE(fs::exists(dir / "eval" / "welfare.json"));
    EXPECT_TRUE(fs::exists(dir / "eval" / "fairness.json"));
    EXPECT_TRUE(fs::exists(dir / "eval" / "report.csv"));
    const Outcome a = run({"audit", "--check", "taylor", "--policy", policy, "--count", "4", "--out", dir.string()});
    EXPECT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("FAIL taylor-exactness"), std::string::npos);
    const Outcome b = run({"audit", "--out", dir.string()});
    EXPECT_EQ(b.code, 0) << b.err;
    EXPECT_NE(b.out.find("PASS offset-equivalence"), std::string::npos);
    EXPECT_EQ(run({"audit", "--check", "safety", "--policy", policy}).code, 1);
}

TEST(Cli, CsvPipeline) {
    const auto dir = testing::scratch_dir("cli_csv");
    ASSERT_EQ(run({"gen-synthetic", "--n", "400", "--seed", "2", "--out", dir.string()}).code, 0);
    ASSERT_TRUE(fs::exists(dir / "synthetic.csv"));
    const std::string csv = (dir / "synthetic.csv").string();
    const std::string schema = (dir / "synthetic.schema.json").string();
    const Outcome th = run({"train-h", "--dataset", "csv", "--data", csv, "--schema", schema, "--normalize", "false",
                        "--epochs", "5", "--out", (dir / "h").string()});
    ASSERT_EQ(th.code, 0) << th.err;
    const Outcome tr = run({"train", "--dataset", "csv", "--data", csv, "--schema", schema, "--normalize", "false",
                        "--labeler", (dir / "h" / "labeler.json").string(), "--epochs", "3", "--batch-size", "16",
                        "--algo", "ei", "--out", (dir / "t").string()});
    ASSERT_EQ(tr.code, 0) << tr.err;
    const Outcome lr = run({"learn-response", "--samples", "100", "--policies", "2", "--unseen", "1", "--epochs", "2",
                        "--n", "400", "--out", (dir / "r").string()});
    ASSERT_EQ(lr.code, 0) << lr.err;
    const Outcome learned = run({"train", "--response", "learned", "--response-model", (dir / "r" / "response.json").string(),
                             "--n", "400", "--epochs", "2", "--batch-size", "16", "--lambda1", "1", "--out",
                             (dir / "l").string()});
    EXPECT_EQ(learned.code, 0) << learned.err;
}

}  // namespace
}  // namespace stwf
