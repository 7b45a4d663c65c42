// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gta/errors.hpp"
#include "gta/losses.hpp"
#include "test_support.hpp"

namespace {

using namespace gta;
using gta::testing::make_group;
using gta::testing::small_format;
using gta::testing::small_model_config;

TEST(Advantages, StandardizesWithPopulationStd) {
    const std::vector<double> r{2, 2, 0, 0};
    const auto s = compute_advantages(r);
    EXPECT_EQ(s.group_mean, 1.0);
    EXPECT_EQ(s.group_std, 1.0);
    EXPECT_EQ(s.advantages, (std::vector<double>{1, 1, -1, -1}));
}

TEST(Advantages, ZeroVarianceGroupGivesExactZeros) {
    const std::vector<double> r{1, 1, 1};
    const auto s = compute_advantages(r);
    for (double a : s.advantages) {
        EXPECT_EQ(a, 0.0);
    }
}

TEST(Advantages, FloorsTinyStd) {
    const std::vector<double> r{0.0, 1e-6};
    const auto s = compute_advantages(r, 1e-4);
    EXPECT_NEAR(s.advantages[1], 0.5e-6 / 1e-4, 1e-15);
}

TEST(Advantages, RejectsSingletonGroups) {
    const std::vector<double> r{1.0};
    EXPECT_THROW((void)compute_advantages(r), ConfigError);
}

TEST(Kl, ClosedFormValues) {
    // rho = pi_ref / pi_cur
    EXPECT_NEAR(kl_token(-1.0, -1.0), 0.0, 1e-9);
    EXPECT_NEAR(kl_token(std::log(0.25), std::log(0.5)), 1.0 - std::log(2.0), 1e-9);
    EXPECT_NEAR(kl_token(std::log(0.5), std::log(0.25)), 0.5 + std::log(2.0) - 1.0, 1e-9);
    EXPECT_NEAR(kl_token(std::log(0.25), std::log(0.5)), 0.306853, 1e-6);
    EXPECT_NEAR(kl_token(std::log(0.5), std::log(0.25)), 0.193147, 1e-6);
}

TEST(Kl, NonNegativeOnLogSpacedGrid) {
    for (int i = 0; i < 10000; ++i) {
        const double log_rho = std::log(1e-6) + (std::log(1e6) - std::log(1e-6)) * i / 9999.0;
        EXPECT_GE(kl_token(-3.0, -3.0 + log_rho), 0.0) << i;
    }
}

TEST(Kl, RejectsNonFiniteInputs) {
    EXPECT_THROW((void)kl_token(std::nan(""), 0.0), NumericError);
}

TEST(Surrogate, ClipCases) {
    EXPECT_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
    EXPECT_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    EXPECT_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    EXPECT_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
    EXPECT_EQ(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
}

TEST(RlObjective, ZeroWhenRatiosOneAndNoKl) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    m.init_random(1);
    std::vector<Group> groups{make_group(f, m, 0.1, 5), make_group(f, m, 0.1, 9)};
    RlLossOptions opts;
    opts.kl_beta = 0.0;
    const LossAndGrad lg = rl_loss_batch(m, groups, opts, true);
    EXPECT_NEAR(lg.loss, 0.0, 1e-6);
    for (const auto& g : groups) {
        for (const auto& r : g.rollouts) {
            EXPECT_EQ(r.logprobs_current, r.logprobs_old);
        }
    }
}

TEST(RlObjective, HandComputedTokenExample) {
    Rollout r;
    r.completion_tokens = {1, 2, 3};
    r.logprobs_current = {std::log(0.6), std::log(0.3), std::log(0.5)};
    r.logprobs_old = {std::log(0.4), std::log(0.3), std::log(0.5)};
    r.logprobs_ref = {std::log(0.3), std::log(0.3), std::log(0.9)};
    r.masks.sft_mask = {false, false, true};
    r.masks.rl_mask = {true, true, false};
    Rollout q = r;
    q.logprobs_current = q.logprobs_old;
    q.logprobs_ref = q.logprobs_old;
    const std::vector<Rollout> rs{r, q};
    const std::vector<double> adv{1.0, -1.0};
    RlLossOptions o;
    o.clip_eps = 0.2;
    o.kl_beta = 0.1;
    const auto obj = rl_objective(rs, adv, o);
    // rollout 0: token 0 ratio 1.5 clipped to 1.2, token 1 ratio 1; kl(0.6 -> 0.3) = 0.5 - ln 0.5 - 1
    const double kl0 = 0.5 - std::log(0.5) - 1.0;
    const double j0 = ((1.2 - 0.1 * kl0) + 1.0) / 2.0;
    const double j1 = -1.0;
    EXPECT_NEAR(obj.loss, -(j0 + j1) / 2.0, 1e-12);
    // clipped token: surrogate gradient vanishes, KL gradient -beta(1 - rho) remains
    EXPECT_NEAR(obj.dloss_dlogp[0][0], 0.1 * (1.0 - 0.5) / 2.0 / 2.0, 1e-12);
    EXPECT_EQ(obj.dloss_dlogp[0][2], 0.0);
}

double max_rel_error(const std::function<double(const TransformerLM&)>& loss, const TransformerLM& m,
                     const std::vector<double>& grad, int probes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    const double h = 1e-5;
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        std::vector<double> dir(grad.size());
        for (auto& d : dir) {
            d = n(rng);
        }
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            analytic += dir[i] * grad[i];
        }
        TransformerLM plus = m, minus = m;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            plus.parameters()[i] += h * dir[i];
            minus.parameters()[i] -= h * dir[i];
        }
        const double numeric = (loss(plus) - loss(minus)) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-6));
    }
    return worst;
}

TEST(Gradients, SftLossMatchesFiniteDifferences) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    ASSERT_LE(m.parameter_count(), 5000U);
    m.init_random(2);
    const std::vector<TeacherSequence> seqs{f.build_teacher_forced_guess("x y", "A"),
                                            f.build_teacher_forced_guess("yy", "B")};
    const LossAndGrad lg = sft_loss_batch(m, seqs);
    const auto loss = [&](const TransformerLM& mm) { return sft_loss_batch(mm, seqs).loss; };
    EXPECT_LE(max_rel_error(loss, m, lg.grad, 50, 7), 1e-3);
}

class RlGradient : public ::testing::TestWithParam<std::tuple<RatioMode, double>> {};

TEST_P(RlGradient, MatchesFiniteDifferences) {
    const auto [mode, old_noise] = GetParam();
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    ASSERT_LE(m.parameter_count(), 5000U);
    m.init_random(3);
    RlLossOptions o;
    o.ratio_mode = mode;
    o.kl_beta = 0.05;
    std::vector<Group> groups{make_group(f, m, old_noise, 11), make_group(f, m, old_noise, 17)};
    const LossAndGrad lg = rl_loss_batch(m, groups, o);
    const auto loss = [&](const TransformerLM& mm) {
        auto copy = groups;
        return rl_loss_batch(mm, copy, o).loss;
    };
    EXPECT_LE(max_rel_error(loss, m, lg.grad, 50, 8), 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Modes, RlGradient,
                         ::testing::Values(std::make_tuple(RatioMode::Token, 0.02),
                                           std::make_tuple(RatioMode::Token, 0.3),
                                           std::make_tuple(RatioMode::Sequence, 0.02)));

TEST(MaskIsolation, SftLossIgnoresTokensAfterTheGuess) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    m.init_random(4);
    const TeacherSequence base = f.build_teacher_forced_guess("x y", "A");
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> tok(0, f.tokenizer().vocab_size() - 1);
    const LossAndGrad ref = sft_loss(m, base.tokens, base.mask.sft_mask);
    for (int trial = 0; trial < 5; ++trial) {
        TeacherSequence ext = base;
        for (int k = 0; k < 6; ++k) {
            ext.tokens.push_back(tok(rng));
            ext.mask.sft_mask.push_back(false);
        }
        const LossAndGrad got = sft_loss(m, ext.tokens, ext.mask.sft_mask);
        EXPECT_EQ(got.loss, ref.loss);
        // Same value; only the summation order over the longer sequence differs.
        ASSERT_EQ(got.grad.size(), ref.grad.size());
        for (std::size_t i = 0; i < ref.grad.size(); ++i) {
            EXPECT_NEAR(got.grad[i], ref.grad[i], 1e-12);
        }
    }
}

TEST(MaskIsolation, GuessPositionsCarryNoRlSignal) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    m.init_random(6);
    const Group g = make_group(f, m, 0.2, 21);
    RlLossOptions o;
    o.kl_beta = 0.1;
    const auto base = rl_objective(g.rollouts, g.stats.advantages, o);
    Group h = g;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& r : h.rollouts) {
        for (std::size_t t = 0; t < r.completion_tokens.size(); ++t) {
            if (r.masks.sft_mask[t]) {
                r.logprobs_current[t] -= std::abs(n(rng));
                r.logprobs_old[t] -= std::abs(n(rng));
                r.logprobs_ref[t] -= std::abs(n(rng));
            }
        }
    }
    const auto moved = rl_objective(h.rollouts, h.stats.advantages, o);
    EXPECT_EQ(moved.loss, base.loss);
    std::size_t guess_positions = 0;
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
        for (std::size_t t = 0; t < g.rollouts[i].completion_tokens.size(); ++t) {
            if (g.rollouts[i].masks.sft_mask[t]) {
                ++guess_positions;
                EXPECT_EQ(moved.dloss_dlogp[i][t], 0.0);
            }
        }
    }
    EXPECT_GT(guess_positions, 0U);
}

TEST(MaskIsolation, FoldingTheGuessIntoRlChangesTheObjective) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    m.init_random(6);
    const Group split = make_group(f, m, 0.2, 21, false);
    const Group folded = make_group(f, m, 0.2, 21, true);
    RlLossOptions o;
    const auto a = rl_objective(split.rollouts, split.stats.advantages, o);
    const auto b = rl_objective(folded.rollouts, folded.stats.advantages, o);
    EXPECT_NE(a.loss, b.loss);
}

TEST(SftLoss, Guards) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    const std::vector<int> seq{3, 4, 5};
    EXPECT_THROW((void)sft_loss(m, seq, {false, false, false}), ConfigError);
    EXPECT_THROW((void)sft_loss(m, seq, {true, false, false}), InternalError);
    EXPECT_THROW((void)sft_loss(m, seq, {false, true}), InternalError);
}

TEST(SftLoss, EqualsNegativeSumOfScoredLogProbs) {
    const GtaFormat f = small_format();
    TransformerLM m(small_model_config(f));
    m.init_random(8);
    const TeacherSequence s = f.build_teacher_forced_guess("x", "B");
    const std::size_t k = f.build_prompt("x").size() + 1;
    const std::vector<int> prefix(s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(k));
    const std::vector<int> target(s.tokens.begin() + static_cast<std::ptrdiff_t>(k), s.tokens.end());
    double expect = 0.0;
    for (double lp : m.score(prefix, target)) {
        expect -= lp;
    }
    EXPECT_NEAR(sft_loss(m, s.tokens, s.mask.sft_mask).loss, expect, 1e-12);
}

}  // namespace
