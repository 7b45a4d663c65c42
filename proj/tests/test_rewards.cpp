// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gta/errors.hpp"
#include "gta/rewards.hpp"

namespace {

gta::GtaSegments valid(const std::string& guess, const std::string& answer) {
    gta::GtaSegments s;
    s.format_valid = true;
    s.guess_text = guess;
    s.think_text = "because";
    s.answer_text = answer;
    return s;
}

const std::vector<std::string> kLabels = {"joy", "anger", "fear"};

TEST(Rewards, TotalIsTheSumOfBinaryParts) {
    EXPECT_EQ(gta::total_reward(1, 1), 2);
    EXPECT_EQ(gta::total_reward(1, 0), 1);
    EXPECT_EQ(gta::total_reward(0, 0), 0);
    EXPECT_THROW((void)gta::total_reward(2, 0), gta::InternalError);
}

TEST(Rewards, Breakdown) {
    const auto ok = gta::assign_rewards(valid("anger", "joy"), "joy", kLabels);
    EXPECT_EQ(ok.format_reward, 1);
    EXPECT_EQ(ok.accuracy_reward, 1);
    EXPECT_EQ(ok.total, 2);
    const auto wrong = gta::assign_rewards(valid("joy", "fear"), "joy", kLabels);
    EXPECT_EQ(wrong.total, 1);
    const auto out_of_set = gta::assign_rewards(valid("joy", "bliss"), "joy", kLabels);
    EXPECT_EQ(out_of_set.format_reward, 1);
    EXPECT_EQ(out_of_set.accuracy_reward, 0);
    gta::GtaSegments broken = valid("joy", "joy");
    broken.format_valid = false;
    EXPECT_EQ(gta::assign_rewards(broken, "joy", kLabels).total, 0);
}

TEST(Rewards, AnswerComparisonIsNormalized) {
    EXPECT_EQ(gta::accuracy_reward(valid("x", "  JOY "), "joy", kLabels), 1);
}

TEST(Rewards, GoldOutsideLabelSetIsADataError) {
    EXPECT_THROW((void)gta::accuracy_reward(valid("joy", "joy"), "surprise", kLabels), gta::DataError);
}

TEST(Rewards, GuessMatchUsesTheGuessSegmentOnly) {
    EXPECT_TRUE(gta::guess_matches(valid("Joy", "anger"), "joy"));
    EXPECT_FALSE(gta::guess_matches(valid("anger", "joy"), "joy"));
}

}  // namespace
