// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "gta/errors.hpp"
#include "gta/policy.hpp"
#include "test_support.hpp"

namespace {

using namespace gta;
namespace fs = std::filesystem;

class PolicyTest : public ::testing::Test {
protected:
    void SetUp() override {
        policy_ = Policy(gta::testing::small_format(), gta::testing::small_model_config(gta::testing::small_format()));
        policy_.model().init_random(42);
        // Sharpen the next-token distribution a little so a handful of tokens dominate.
        for (double& p : policy_.model().parameters()) {
            p *= 4.0;
        }
        prompt_ = policy_.format().build_prompt("x y");
    }

    std::vector<double> next_token_probs(double temperature) const {
        const int V = policy_.format().tokenizer().vocab_size();
        std::vector<double> lp(static_cast<std::size_t>(V));
        for (int v = 0; v < V; ++v) {
            const std::vector<int> c{v};
            lp[static_cast<std::size_t>(v)] = policy_.model().score(prompt_, c)[0] / temperature;
        }
        const double mx = *std::max_element(lp.begin(), lp.end());
        double z = 0.0;
        for (double& x : lp) {
            x = std::exp(x - mx);
            z += x;
        }
        for (double& x : lp) {
            x /= z;
        }
        return lp;
    }

    void expect_frequencies(const SamplingControls& c, const std::vector<double>& probs) const {
        const int n = 20000;
        const auto samples = sample_sequences(policy_.model(), prompt_, n, c, 123);
        std::map<int, int> counts;
        for (const auto& s : samples) {
            ASSERT_EQ(s.tokens.size(), 1U);
            ++counts[s.tokens[0]];
        }
        for (std::size_t v = 0; v < probs.size(); ++v) {
            const double p = probs[v];
            const double observed = counts.count(static_cast<int>(v)) ? counts[static_cast<int>(v)] : 0;
            const double se = std::sqrt(n * p * (1.0 - p));
            EXPECT_LE(std::abs(observed - n * p), 3.0 * se + 1.0) << "token " << v << " p=" << p;
        }
    }

    Policy policy_;
    std::vector<int> prompt_;
};

TEST_F(PolicyTest, SampleFrequenciesMatchModelProbabilities) {
    SamplingControls c;
    c.max_new_tokens = 1;
    expect_frequencies(c, next_token_probs(1.0));
}

TEST_F(PolicyTest, TemperatureSharpensTheDistribution) {
    SamplingControls c;
    c.max_new_tokens = 1;
    c.temperature = 0.5;
    expect_frequencies(c, next_token_probs(0.5));
}

TEST_F(PolicyTest, TopKRestrictsSupport) {
    SamplingControls c;
    c.max_new_tokens = 1;
    c.top_k = 3;
    auto p = next_token_probs(1.0);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });
    double kept = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        kept += p[order[i]];
    }
    std::vector<double> q(p.size(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        q[order[i]] = p[order[i]] / kept;
    }
    expect_frequencies(c, q);
}

TEST_F(PolicyTest, ReportedLogProbsAreUntempered) {
    SamplingControls c;
    c.max_new_tokens = 6;
    c.temperature = 0.7;
    for (const auto& s : sample_sequences(policy_.model(), prompt_, 5, c, 9)) {
        const auto scored = policy_.model().score(prompt_, s.tokens);
        ASSERT_EQ(scored.size(), s.logprobs.size());
        for (std::size_t t = 0; t < scored.size(); ++t) {
            EXPECT_NEAR(scored[t], s.logprobs[t], 1e-9);
        }
    }
}

TEST_F(PolicyTest, GreedyIsDeterministicAndArgmax) {
    SamplingControls c;
    c.greedy = true;
    c.max_new_tokens = 8;
    const auto a = sample_sequences(policy_.model(), prompt_, 2, c, 1);
    const auto b = sample_sequences(policy_.model(), prompt_, 1, c, 999);
    EXPECT_EQ(a[0].tokens, a[1].tokens);
    EXPECT_EQ(a[0].tokens, b[0].tokens);
    const auto p = next_token_probs(1.0);
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    EXPECT_EQ(a[0].tokens[0], best);
}

TEST_F(PolicyTest, SeedReproducibility) {
    SamplingControls c;
    c.max_new_tokens = 10;
    const auto a = policy_.sample_completions(prompt_, 6, c, 77);
    const auto b = policy_.sample_completions(prompt_, 6, c, 77);
    const auto d = policy_.sample_completions(prompt_, 6, c, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].completion_tokens, b[i].completion_tokens);
        EXPECT_EQ(a[i].logprobs_current, b[i].logprobs_current);
        any_diff = any_diff || a[i].completion_tokens != d[i].completion_tokens;
    }
    EXPECT_TRUE(any_diff);
}

TEST_F(PolicyTest, CompletionsStopAtAnswerCloseOrEos) {
    SamplingControls c;
    c.max_new_tokens = 30;
    const int close = policy_.format().answer_close_id();
    for (const auto& r : policy_.sample_completions(prompt_, 50, c, 5)) {
        for (std::size_t t = 0; t + 1 < r.completion_tokens.size(); ++t) {
            EXPECT_NE(r.completion_tokens[t], close);
            EXPECT_NE(r.completion_tokens[t], static_cast<int>(Tokenizer::kEos));
        }
        EXPECT_LE(r.completion_tokens.size(), 30U);
    }
}

TEST_F(PolicyTest, ControlsValidation) {
    SamplingControls c;
    c.temperature = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.greedy = true;
    EXPECT_NO_THROW(c.validate());
    c.max_new_tokens = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    SamplingControls k;
    k.top_k = -1;
    EXPECT_THROW(k.validate(), ConfigError);
    EXPECT_THROW((void)sample_sequences(policy_.model(), prompt_, 0, SamplingControls{}, 1), ConfigError);
}

TEST_F(PolicyTest, SnapshotIsIndependentOfLaterUpdates) {
    const ReferenceSnapshot snap = clone_snapshot(policy_.model(), 3);
    const std::vector<double> before(snap.model.parameters().begin(), snap.model.parameters().end());
    for (double& p : policy_.model().parameters()) {
        p += 1.0;
    }
    EXPECT_TRUE(std::equal(before.begin(), before.end(), snap.model.parameters().begin()));
    EXPECT_EQ(snap.snapshot_step, 3);
    policy_.model().parameters()[0] = std::nan("");
    EXPECT_THROW((void)clone_snapshot(policy_.model(), 4), NumericError);
}

class CheckpointTest : public PolicyTest {
protected:
    void SetUp() override {
        PolicyTest::SetUp();
        dir_ = fs::temp_directory_path() / fmt_dir();
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    static std::string fmt_dir() {
        return "gta_policy_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
               ::testing::UnitTest::GetInstance()->current_test_info()->name();
    }
    fs::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsExact) {
    const fs::path p = dir_ / "a.ckpt";
    save_checkpoint(p, policy_, CheckpointInfo{12, "abc"});
    CheckpointInfo info;
    const Policy back = load_checkpoint(p, &info);
    EXPECT_EQ(info.step, 12);
    EXPECT_EQ(info.config_hash, "abc");
    EXPECT_TRUE(std::equal(back.model().parameters().begin(), back.model().parameters().end(),
                           policy_.model().parameters().begin(), policy_.model().parameters().end()));
    EXPECT_EQ(back.format().tmpl().to_json(), policy_.format().tmpl().to_json());
    EXPECT_EQ(back.format().tokenizer().vocabulary(), policy_.format().tokenizer().vocabulary());
    EXPECT_EQ(back.model().score(prompt_, std::vector<int>{4, 5}), policy_.model().score(prompt_, std::vector<int>{4, 5}));
    EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_F(CheckpointTest, CorruptFilesAreRejected) {
    const fs::path p = dir_ / "a.ckpt";
    save_checkpoint(p, policy_, CheckpointInfo{});
    std::string bytes;
    {
        std::ifstream is(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(is), {});
    }
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << content;
        return dir_ / name;
    };
    EXPECT_THROW((void)load_checkpoint(dir_ / "missing.ckpt"), IoError);
    EXPECT_THROW((void)load_checkpoint(write("magic", "NOTACKPT" + bytes.substr(8))), DataError);
    EXPECT_THROW((void)load_checkpoint(write("trunc", bytes.substr(0, bytes.size() - 16))), DataError);
    EXPECT_THROW((void)load_checkpoint(write("short", bytes.substr(0, 20))), DataError);
    std::string garbled = bytes;
    garbled[16] = 'x';  // opening brace of the JSON header
    EXPECT_THROW((void)load_checkpoint(write("garbled", garbled)), DataError);
}

}  // namespace
