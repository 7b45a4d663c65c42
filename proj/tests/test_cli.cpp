// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gta/cli.hpp"
#include "gta/run_log.hpp"
#include "gta/trainer.hpp"
#include "test_support.hpp"

namespace {

using namespace gta;
namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

TrainConfig small_run_config() {
    TrainConfig c;
    c.group_size = 4;
    c.batch_size = 2;
    c.reuse_factor = 2;
    c.max_steps = 3;
    c.eval_period = 0;
    c.checkpoint_period = 0;
    c.system_instruction = "c";
    c.sampling.max_new_tokens = 12;
    c.model.context_length = 64;
    c.model.d_model = 8;
    c.model.n_heads = 2;
    c.model.n_layers = 1;
    c.model.d_ff = 16;
    return c;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("gta_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        cli::SynthArgs s;
        s.out = dir_ / "data";
        s.n_classes = 2;
        s.n_train = 12;
        s.n_test = 4;
        s.seed = 1;
        ASSERT_EQ(cli::cmd_synth(s, out_, err_), cli::kOk) << err_.str();
        write_config("config.json", small_run_config());
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const TrainConfig& c) const {
        std::ofstream os(dir_ / name);
        os << c.to_json().dump(2);
        return dir_ / name;
    }
    int train(const std::string& out, const std::string& method, const fs::path& data) {
        cli::TrainArgs a;
        a.config = dir_ / "config.json";
        a.data = data;
        a.out = dir_ / out;
        a.method = method;
        return cli::cmd_train(a, out_, err_);
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

TEST_F(CliTest, TrainEvaluateCompareRoundTrip) {
    ASSERT_EQ(train("gta", "gta", dir_ / "data"), cli::kOk) << err_.str();
    ASSERT_EQ(train("grpo", "grpo", dir_ / "data"), cli::kOk) << err_.str();
    for (const char* run : {"gta", "grpo"}) {
        for (const char* f : {"config.json", "metrics.tsv", "gradients.tsv", "manifest.json", "policy.ckpt"}) {
            EXPECT_TRUE(fs::exists(dir_ / run / f)) << run << "/" << f;
        }
    }
    const MetricsTable t = read_metrics_table(dir_ / "grpo" / "metrics.tsv");
    EXPECT_EQ(t.header.at("method"), "grpo");

    cli::EvaluateArgs e;
    e.checkpoint = dir_ / "gta" / "policy.ckpt";
    e.data = dir_ / "data";
    e.max_new_tokens = 12;
    out_.str("");
    ASSERT_EQ(cli::cmd_evaluate(e, out_, err_), cli::kOk) << err_.str();
    EXPECT_NE(out_.str().find("weighted_f1\t"), std::string::npos);
    e.split = "dev";
    EXPECT_EQ(cli::cmd_evaluate(e, out_, err_), cli::kValidationError);

    cli::CompareArgs c;
    c.runs = {dir_ / "gta", dir_ / "grpo"};
    c.out = dir_ / "cmp";
    c.plot = true;
    ASSERT_EQ(cli::cmd_compare(c, out_, err_), cli::kOk) << err_.str();
    const std::string table = read_file(dir_ / "cmp" / "compare.tsv");
    EXPECT_NE(table.find("steps_to_0.9"), std::string::npos);
    EXPECT_NE(table.find("\tgrpo\t"), std::string::npos);
    EXPECT_NE(read_file(dir_ / "cmp" / "curves.tsv").find("gta:answer_reward"), std::string::npos);
    EXPECT_NE(read_file(dir_ / "cmp" / "curves.svg").find("<svg"), std::string::npos);
}

TEST_F(CliTest, SelfComparisonHasZeroDeltas) {
    ASSERT_EQ(train("a", "gta", dir_ / "data"), cli::kOk) << err_.str();
    cli::CompareArgs c;
    c.runs = {dir_ / "a", dir_ / "a"};
    c.out = dir_ / "cmp";
    ASSERT_EQ(cli::cmd_compare(c, out_, err_), cli::kOk) << err_.str();
    std::istringstream rows(read_file(dir_ / "cmp" / "compare.tsv"));
    std::string line;
    std::getline(rows, line);
    int n = 0;
    while (std::getline(rows, line)) {
        ++n;
        EXPECT_NE(line.find("\t0\t0.000000\t0.000000"), std::string::npos) << line;
    }
    EXPECT_EQ(n, 2);
}

TEST_F(CliTest, CompareRejectsMismatchedOrMissingRuns) {
    cli::SynthArgs s;
    s.out = dir_ / "other";
    s.n_classes = 2;
    s.n_train = 12;
    s.n_test = 4;
    s.seed = 2;
    ASSERT_EQ(cli::cmd_synth(s, out_, err_), cli::kOk);
    ASSERT_EQ(train("a", "gta", dir_ / "data"), cli::kOk) << err_.str();
    ASSERT_EQ(train("b", "gta", dir_ / "other"), cli::kOk) << err_.str();
    cli::CompareArgs c;
    c.out = dir_ / "cmp";
    c.runs = {dir_ / "a", dir_ / "b"};
    err_.str("");
    EXPECT_EQ(cli::cmd_compare(c, out_, err_), cli::kValidationError);
    EXPECT_NE(err_.str().find("different datasets"), std::string::npos);
    c.runs = {dir_ / "a", dir_ / "nowhere"};
    err_.str("");
    EXPECT_EQ(cli::cmd_compare(c, out_, err_), cli::kValidationError);
    EXPECT_NE(err_.str().find("nowhere"), std::string::npos);
    c.runs = {dir_ / "a"};
    EXPECT_EQ(cli::cmd_compare(c, out_, err_), cli::kValidationError);
}

TEST_F(CliTest, InvalidConfigExitsWithValidationErrorAndWritesNothing) {
    TrainConfig bad = small_run_config();
    bad.group_size = 1;
    cli::TrainArgs a;
    a.config = write_config("bad.json", bad);
    a.data = dir_ / "data";
    a.out = dir_ / "run";
    EXPECT_EQ(cli::cmd_train(a, out_, err_), cli::kValidationError);
    EXPECT_FALSE(fs::exists(dir_ / "run"));
    a.config = dir_ / "config.json";
    a.method = "ppo";
    EXPECT_EQ(cli::cmd_train(a, out_, err_), cli::kValidationError);
    EXPECT_FALSE(fs::exists(dir_ / "run"));
    a.method.reset();
    a.force = a.resume = true;
    EXPECT_EQ(cli::cmd_train(a, out_, err_), cli::kValidationError);
    EXPECT_FALSE(fs::exists(dir_ / "run"));
}

TEST_F(CliTest, GenerateReportsRewardsAgainstGold) {
    GtaTemplate t;
    t.system_instruction = "c";
    t.label_set = {"A", "B"};
    const GtaFormat f(t);
    const auto P = f.build_prompt("ab").size();
    save_checkpoint(dir_ / "s.ckpt", gta::testing::scripted_policy(f, P, f.render_completion("A", "ab", "A", true)),
                    {});
    cli::GenerateArgs g;
    g.checkpoint = dir_ / "s.ckpt";
    g.text = "ab";
    g.greedy = true;
    g.gold = "A";
    out_.str("");
    ASSERT_EQ(cli::cmd_generate(g, out_, err_), cli::kOk) << err_.str();
    EXPECT_NE(out_.str().find("format_valid=true"), std::string::npos) << out_.str();
    EXPECT_NE(out_.str().find("answer: A"), std::string::npos);
    EXPECT_NE(out_.str().find("total=2"), std::string::npos);
    g.gold = "B";
    out_.str("");
    ASSERT_EQ(cli::cmd_generate(g, out_, err_), cli::kOk);
    EXPECT_NE(out_.str().find("format=1 accuracy=0 total=1"), std::string::npos) << out_.str();
    g.gold = "C";
    EXPECT_EQ(cli::cmd_generate(g, out_, err_), cli::kValidationError);
}

TEST_F(CliTest, BaseWritesALoadableCheckpoint) {
    cli::BaseArgs b;
    b.config = dir_ / "config.json";
    b.data = dir_ / "data";
    b.out = dir_ / "base" / "base.ckpt";
    b.steps = 3;
    b.batch_size = 2;
    ASSERT_EQ(cli::cmd_base(b, out_, err_), cli::kOk) << err_.str();
    TrainConfig c = small_run_config();
    c.init_checkpoint = b.out.string();
    write_config("config.json", c);
    EXPECT_EQ(train("from_base", "gta", dir_ / "data"), cli::kOk) << err_.str();
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(GTA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryExitCodes) {
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary("train --data x"), 1);
    EXPECT_EQ(run_binary("frobnicate"), 1);
    TrainConfig bad = small_run_config();
    bad.group_size = 1;
    const auto cfg = write_config("bad.json", bad);
    EXPECT_EQ(run_binary("train --config " + cfg.string() + " --data " + (dir_ / "data").string() + " --out " +
                         (dir_ / "run").string()),
              1);
    EXPECT_FALSE(fs::exists(dir_ / "run"));
    EXPECT_EQ(run_binary("train --config " + (dir_ / "config.json").string() + " --data " + (dir_ / "data").string() +
                         " --out " + (dir_ / "run").string()),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "run" / "policy.ckpt"));
}

}  // namespace
